#include "fedsfr/channel.hpp"

#include <cmath>

namespace fedsfr {

Constellation Constellation::qam(int order, SymbolMapping mapping) {
  Constellation c;
  c.order = order;
  c.points.resize(order, 2);
  if (order == 2) {
    c.points << -1.0, 0.0, 1.0, 0.0;
    return c;
  }
  const int side = static_cast<int>(std::lround(std::sqrt(double(order))));
  if (side * side != order || (side != 2 && side != 4 && side != 8))
    throw Error("unsupported constellation order " + std::to_string(order));

  // PAM levels -(L-1), ..., (L-1) step 2; mean grid power is 2(L^2-1)/3.
  const double norm = std::sqrt(2.0 * (side * side - 1) / 3.0);
  auto level = [&](int j) { return (2.0 * j - (side - 1)) / norm; };
  for (int i = 0; i < order; ++i) {
    int row = i / side;
    int col = i % side;
    if (mapping == SymbolMapping::kGray) {
      row ^= row >> 1;
      col ^= col >> 1;
    }
    c.points(i, 0) = level(col);
    c.points(i, 1) = level(row);
  }
  return c;
}

namespace {

// Argmin over rows of `table` for each row of `queries`; exact distance ties
// go to the lower index and are reported.
std::vector<int> nearest_rows(const RowMatrix& table, const RowMatrix& queries,
                              bool* tie) {
  if (table.cols() != queries.cols())
    throw Error("nearest_rows: dimension mismatch");
  std::vector<int> idx(queries.rows());
  bool any_tie = false;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    int best = 0;
    double best_d = (queries.row(i) - table.row(0)).squaredNorm();
    for (Eigen::Index j = 1; j < table.rows(); ++j) {
      const double d = (queries.row(i) - table.row(j)).squaredNorm();
      if (d == best_d) any_tie = true;
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    idx[i] = best;
  }
  if (tie) *tie = any_tie;
  return idx;
}

}  // namespace

std::vector<int> vq_quantize(const RowMatrix& codebook, const RowMatrix& features,
                             bool* tie) {
  return nearest_rows(codebook, features, tie);
}

RowMatrix modulate(const Constellation& cons, const std::vector<int>& indices) {
  RowMatrix s(static_cast<Eigen::Index>(indices.size()), 2);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= cons.order)
      throw Error("modulate: index " + std::to_string(indices[i]) +
                  " out of range for order " + std::to_string(cons.order));
    s.row(static_cast<Eigen::Index>(i)) = cons.points.row(indices[i]);
  }
  return s;
}

RowMatrix awgn(const RowMatrix& symbols, double sigma2, RngStream& rng) {
  if (sigma2 == 0.0) return symbols;
  const double comp_sd = std::sqrt(sigma2 / 2.0);
  RowMatrix out = symbols;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) out(i, j) += comp_sd * rng.normal();
  return out;
}

std::vector<int> detect(const Constellation& cons, const RowMatrix& received,
                        bool* tie) {
  return nearest_rows(cons.points, received, tie);
}

TransmitResult transmit(const RowMatrix& codebook, const Constellation& cons,
                        const RowMatrix& features, double snr_db, RngStream& rng) {
  if (codebook.rows() != cons.order)
    throw Error("transmit: codebook size differs from constellation order");
  TransmitResult r;
  bool tie_q = false;
  bool tie_d = false;
  r.sent_idx = vq_quantize(codebook, features, &tie_q);
  const RowMatrix sent = modulate(cons, r.sent_idx);
  const RowMatrix noisy = awgn(sent, noise_variance_from_snr_db(snr_db), rng);
  r.recv_idx = detect(cons, noisy, &tie_d);
  r.tie = tie_q || tie_d;
  r.received.resize(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < r.received.rows(); ++i)
    r.received.row(i) = codebook.row(r.recv_idx[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace fedsfr
