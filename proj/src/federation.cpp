#include "fedsfr/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "fedsfr/analysis.hpp"
#include "fedsfr/compression.hpp"

namespace fedsfr {

namespace {

std::vector<int> sample_without_replacement(int n, int k, RngStream& rng) {
  if (k > n) throw Error("cannot sample " + std::to_string(k) + " of " +
                         std::to_string(n) + " without replacement");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i)
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(i + rng.uniform_int(n - i))]);
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

}  // namespace

RoundPlan sample_clients(int total, int model_count, int feature_count,
                         RngStream& rng) {
  if (model_count < 1) throw Error("sample_clients: need at least one model uploader");
  if (model_count + feature_count > total)
    throw Error("sample_clients: more participants than clients");
  const int participants = model_count + feature_count;
  const std::vector<int> drawn = sample_without_replacement(total, participants, rng);

  // i.i.d. channel scores; the best channels carry full model updates.
  std::vector<std::pair<double, int>> scored;
  scored.reserve(drawn.size());
  for (int id : drawn) scored.push_back({rng.uniform(), id});
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  RoundPlan plan;
  for (int i = 0; i < participants; ++i) {
    if (i < model_count)
      plan.model_clients.push_back(scored[static_cast<std::size_t>(i)].second);
    else
      plan.feature_clients.push_back(scored[static_cast<std::size_t>(i)].second);
  }
  std::sort(plan.model_clients.begin(), plan.model_clients.end());
  std::sort(plan.feature_clients.begin(), plan.feature_clients.end());
  return plan;
}

LocalTrainResult local_train(const ModelConfig& cfg, const Constellation& cons,
                             const ModelParams& w_global, const Dataset& data,
                             const Vector& error_memory, int steps, double eta,
                             int batch_size, double snr_db, double alpha_c,
                             RngStream& rng) {
  if (data.size() == 0) throw Error("local_train: empty dataset");
  if (batch_size > data.size())
    throw Error("local_train: batch size " + std::to_string(batch_size) +
                " exceeds dataset size " + std::to_string(data.size()));

  const LayerMap map = layer_map(cfg);
  LocalTrainResult out;
  out.w_local = w_global;
  Vector grad_sum = Vector::Zero(map.dim);
  if (steps == 0) {
    out.update = error_memory;
    return out;
  }

  ImageLossGraph loss(cfg, &cons, snr_db, alpha_c);
  Vector w_flat = flatten(cfg, w_global);
  for (int e = 0; e < steps; ++e) {
    const std::vector<int> batch =
        sample_without_replacement(data.size(), batch_size, rng);
    Vector grad = Vector::Zero(map.dim);
    double loss_acc = 0.0;
    const ModelParams w_now = unflatten(cfg, w_flat);
    for (int idx : batch) {
      auto [breakdown, g] =
          loss.eval_grad(w_now, data.images[static_cast<std::size_t>(idx)], rng);
      grad += g;
      loss_acc += breakdown.total;
    }
    grad /= static_cast<double>(batch.size());
    out.max_batch_grad_norm = std::max(out.max_batch_grad_norm, grad.norm());
    if (e + 1 == steps) out.last_loss = loss_acc / batch.size();
    w_flat -= eta * grad;
    grad_sum += grad;
  }
  out.w_local = unflatten(cfg, w_flat);
  out.update = error_memory + eta * grad_sum;
  return out;
}

std::vector<RowMatrix> extract_features(const ModelConfig& cfg, const ModelParams& p,
                                        const Dataset& data,
                                        const std::vector<int>& public_idx,
                                        int count, int bits, RngStream& rng) {
  if (count > static_cast<int>(public_idx.size()))
    throw Error("extract_features: requested " + std::to_string(count) +
                " of " + std::to_string(public_idx.size()) + " public images");
  const std::vector<int> picks =
      sample_without_replacement(static_cast<int>(public_idx.size()), count, rng);
  std::vector<RowMatrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int pick : picks) {
    const int img = public_idx[static_cast<std::size_t>(pick)];
    const RowMatrix y = encode(cfg, p, data.images[static_cast<std::size_t>(img)]);
    out.push_back(uniform_scalar_quantize(y, bits).dequantized);
  }
  return out;
}

Vector aggregation_weights(WeightScheme scheme, const std::vector<double>& sizes,
                           const std::vector<double>& losses) {
  const auto normalize = [](Vector v) {
    const double total = v.sum();
    if (total <= 0.0) throw Error("aggregation_weights: non-positive total");
    return Vector(v / total);
  };

  switch (scheme) {
    case WeightScheme::kFedAvg: {
      if (sizes.empty()) throw Error("aggregation_weights: no clients");
      Vector v(static_cast<Eigen::Index>(sizes.size()));
      for (std::size_t i = 0; i < sizes.size(); ++i) v[static_cast<Eigen::Index>(i)] = sizes[i];
      return normalize(std::move(v));
    }
    case WeightScheme::kFedDma: {
      if (losses.empty()) throw Error("aggregation_weights: no losses");
      const auto [lo_it, hi_it] = std::minmax_element(losses.begin(), losses.end());
      const double lo = *lo_it;
      const double hi = *hi_it;
      Vector v(static_cast<Eigen::Index>(losses.size()));
      for (std::size_t i = 0; i < losses.size(); ++i) {
        const double normed = hi > lo ? (losses[i] - lo) / (hi - lo) : 0.0;
        v[static_cast<Eigen::Index>(i)] = std::exp(normed);
      }
      return normalize(std::move(v));
    }
    case WeightScheme::kFedLol: {
      if (losses.empty()) throw Error("aggregation_weights: no losses");
      const int k = static_cast<int>(losses.size());
      if (k == 1) return Vector::Ones(1);
      const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
      if (total <= 0.0) throw Error("aggregation_weights: losses must be positive");
      Vector v(k);
      for (int i = 0; i < k; ++i)
        v[i] = (total - losses[static_cast<std::size_t>(i)]) / ((k - 1) * total);
      return v;
    }
  }
  throw Error("aggregation_weights: unreachable");
}

ModelParams aggregate(const ModelConfig& cfg, const ModelParams& w,
                      const std::vector<Vector>& dense_updates,
                      const Vector& weights, int total, int uploaders) {
  if (dense_updates.empty() || uploaders < 1)
    throw Error("aggregate: need at least one uploader");
  if (static_cast<Eigen::Index>(dense_updates.size()) != weights.size())
    throw Error("aggregate: weight/update count mismatch");
  Vector w_flat = flatten(cfg, w);
  const double scale = static_cast<double>(total) / uploaders;
  for (std::size_t i = 0; i < dense_updates.size(); ++i)
    w_flat -= scale * weights[static_cast<Eigen::Index>(i)] * dense_updates[i];
  return unflatten(cfg, w_flat);
}

ModelParams server_refine(const ModelConfig& cfg, const Constellation& cons,
                          const ModelParams& w_half,
                          const std::vector<RowMatrix>& pool, int steps, double eta,
                          int batch_size, double snr_db, double alpha_s,
                          RngStream& rng) {
  if (steps == 0 || eta == 0.0 || pool.empty()) return w_half;
  const int batch = std::min(batch_size, static_cast<int>(pool.size()));
  const LayerMap map = layer_map(cfg);
  FeatureLossGraph loss(cfg, &cons, snr_db, alpha_s);
  Vector w_flat = flatten(cfg, w_half);
  for (int e = 0; e < steps; ++e) {
    const std::vector<int> picks =
        sample_without_replacement(static_cast<int>(pool.size()), batch, rng);
    Vector grad = Vector::Zero(map.dim);
    const ModelParams w_now = unflatten(cfg, w_flat);
    for (int idx : picks)
      grad += loss.eval_grad(w_now, pool[static_cast<std::size_t>(idx)], rng).second;
    grad /= static_cast<double>(batch);
    w_flat -= eta * grad;
  }
  return unflatten(cfg, w_flat);
}

// ---------------------------------------------------------------------------

struct Experiment::ParticipantResult {
  bool uploads_model = false;
  LocalTrainResult train;
  Vector dense_update;               // model uploaders
  bool has_nu = false;               // set when the update had positive norm
  double nu_event = 0.0;             // can be negative under value noise
  std::vector<RowMatrix> features;   // feature uploaders
};

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  map_ = layer_map(cfg_.model);
  cons_ = Constellation::qam(cfg_.model.codebook_size);
}

void Experiment::init() {
  if (initialized_) return;
  Dataset full;
  if (cfg_.data.kind == "raw") {
    full = load_raw(cfg_.data.path);
    if (full.channels != cfg_.model.channels || full.height != cfg_.model.height ||
        full.width != cfg_.model.width)
      throw Error("experiment: raw dataset shape does not match the model");
  } else {
    full = generate_synthetic(cfg_.data.n, cfg_.model.channels, cfg_.model.height,
                              cfg_.model.width,
                              synthetic_kind_from_string(cfg_.data.kind), cfg_.seed);
  }
  if (full.size() < cfg_.clients)
    throw Error("experiment: dataset smaller than the client count");

  const auto parts = partition(full, cfg_.clients,
                               partition_scheme_from_string(cfg_.data.partition),
                               cfg_.seed);
  clients_.clear();
  for (int k = 0; k < cfg_.clients; ++k) {
    ClientState c;
    c.id = k;
    c.data = parts[static_cast<std::size_t>(k)];
    c.public_idx = mark_public(c.data, cfg_.data.public_fraction,
                               cfg_.seed ^ static_cast<std::uint64_t>(k + 1));
    c.error_memory = Vector::Zero(map_.dim);
    c.p_k = static_cast<double>(c.data.size()) / full.size();
    clients_.push_back(std::move(c));
  }

  const Dataset eval = generate_synthetic(
      cfg_.eval_count, cfg_.model.channels, cfg_.model.height, cfg_.model.width,
      cfg_.data.kind == "raw" ? SyntheticKind::kGaussians
                              : synthetic_kind_from_string(cfg_.data.kind),
      cfg_.seed ^ 0x5eedfeedull);
  eval_images_ = eval.images;

  model_ = init_model(cfg_.model, cfg_.seed);
  round_ = 0;
  eps_cumulative_ = 0.0;
  trace_ = MetricsTrace{};
  trace_.rows.push_back(evaluate(0, 0.0, false));
  initialized_ = true;
}

double Experiment::eval_psnr(int eval_tag) {
  if (eval_images_.empty()) return 0.0;
  RngStream rng = derive_stream(cfg_.seed, {stream_tag::kEval,
                                            static_cast<std::uint64_t>(eval_tag)});
  double acc = 0.0;
  for (const Vector& x : eval_images_) {
    const RowMatrix y = encode(cfg_.model, model_, x);
    const TransmitResult tr = transmit(model_.codebook, cons_, y, cfg_.snr_db, rng);
    const Vector x_hat = decode(cfg_.model, model_, tr.received);
    acc += psnr(x, x_hat, 1.0);
  }
  return acc / static_cast<double>(eval_images_.size());
}

MetricsRow Experiment::evaluate(int eval_tag, double loss_mean, bool have_loss_mean) {
  MetricsRow row;
  row.t = eval_tag;
  row.psnr_db = eval_psnr(eval_tag);
  row.dp_enabled = cfg_.dp.enabled;
  row.eps_cumulative = eps_cumulative_;
  if (have_loss_mean) {
    row.loss_mean = loss_mean;
  } else if (!eval_images_.empty()) {
    // Pre-training record: no client reports yet, use the evaluation set.
    RngStream rng = derive_stream(cfg_.seed, {stream_tag::kEval, 0, 1});
    ImageLossGraph loss(cfg_.model, &cons_, cfg_.snr_db, cfg_.alpha_c);
    double acc = 0.0;
    for (const Vector& x : eval_images_) acc += loss.eval(model_, x, rng).total;
    row.loss_mean = acc / static_cast<double>(eval_images_.size());
  }
  return row;
}

double Experiment::probe_grad_norm2() {
  if (eval_images_.empty()) return 0.0;
  RngStream rng = derive_stream(cfg_.seed, {stream_tag::kGradProbe});
  ImageLossGraph loss(cfg_.model, &cons_, cfg_.snr_db, cfg_.alpha_c);
  const int count = std::min<int>(8, static_cast<int>(eval_images_.size()));
  Vector grad = Vector::Zero(map_.dim);
  for (int i = 0; i < count; ++i)
    grad += loss.eval_grad(model_, eval_images_[static_cast<std::size_t>(i)], rng).second;
  grad /= static_cast<double>(count);
  return grad.squaredNorm();
}

double Experiment::probe_fr_loss(const ModelParams& p,
                                 const std::vector<RowMatrix>& pool, int round) {
  RngStream rng = derive_stream(cfg_.seed, {stream_tag::kFrProbe,
                                            static_cast<std::uint64_t>(round)});
  FeatureLossGraph loss(cfg_.model, &cons_, cfg_.snr_db, cfg_.alpha_s);
  double acc = 0.0;
  for (const RowMatrix& y : pool) acc += loss.eval(p, y, rng).total;
  return acc / static_cast<double>(pool.size());
}

void Experiment::step(int threads) {
  init();
  const int t = round_;
  const double eta_c = decayed_rate(cfg_.eta_c0, cfg_.decay_factor,
                                    cfg_.decay_interval, t);
  const double eta_s = decayed_rate(cfg_.eta_s0, cfg_.decay_factor,
                                    cfg_.decay_interval, t);

  RngStream sample_rng = derive_stream(cfg_.seed, {stream_tag::kSample,
                                                   static_cast<std::uint64_t>(t)});
  const RoundPlan plan = sample_clients(cfg_.clients, cfg_.model_uploaders,
                                        cfg_.feature_uploaders, sample_rng);

  std::vector<int> uploaders = plan.model_clients;
  std::vector<int> featurers;
  if (cfg_.mode == RunMode::kFedSfr) {
    featurers = plan.feature_clients;
  } else {
    uploaders.insert(uploaders.end(), plan.feature_clients.begin(),
                     plan.feature_clients.end());
    std::sort(uploaders.begin(), uploaders.end());
  }

  std::vector<int> participants = uploaders;
  participants.insert(participants.end(), featurers.begin(), featurers.end());
  std::sort(participants.begin(), participants.end());

  // Client phase. Every stream is derived from (seed, purpose, round, id), so
  // the thread count cannot change any value.
  std::vector<ParticipantResult> results(participants.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](std::size_t slot) {
    try {
      const int id = participants[slot];
      const ClientState& client = clients_[static_cast<std::size_t>(id)];
      ParticipantResult& r = results[slot];
      r.uploads_model =
          std::binary_search(uploaders.begin(), uploaders.end(), id);
      // Uplink budget follows channel quality: participants drawn into the
      // poor-channel set keep the smaller fraction even when the baseline has
      // them upload model updates instead of features.
      const bool poor_channel = std::binary_search(
          plan.feature_clients.begin(), plan.feature_clients.end(), id);
      const double uplink_fraction =
          poor_channel ? cfg_.feature_fraction : cfg_.model_fraction;
      RngStream train_rng =
          derive_stream(cfg_.seed, {stream_tag::kClientTrain,
                                    static_cast<std::uint64_t>(t),
                                    static_cast<std::uint64_t>(id)});
      r.train = local_train(cfg_.model, cons_, model_, client.data,
                            client.error_memory, cfg_.local_steps, eta_c,
                            cfg_.batch_size, cfg_.snr_db, cfg_.alpha_c, train_rng);
      if (r.uploads_model) {
        const Vector& g = r.train.update;
        CompressedUpdate cu;
        if (cfg_.dp.enabled) {
          RngStream dp_rng = derive_stream(cfg_.seed, {stream_tag::kDp,
                                                       static_cast<std::uint64_t>(t),
                                                       static_cast<std::uint64_t>(id)});
          cu = privatize_update(g, map_, uplink_fraction, cfg_.dp, dp_rng);
        } else {
          RngStream c_rng = derive_stream(cfg_.seed, {stream_tag::kCompress,
                                                      static_cast<std::uint64_t>(t),
                                                      static_cast<std::uint64_t>(id)});
          cu = compress(g, map_, uplink_fraction, cfg_.qsgd_bits, c_rng);
        }
        r.dense_update = cu.dense(map_);
        const double gn = g.squaredNorm();
        if (gn > 0.0) {
          r.has_nu = true;
          r.nu_event = 1.0 - (g - r.dense_update).squaredNorm() / gn;
        }
      } else {
        ModelParams encode_params = r.train.w_local;
        if (cfg_.dp.enabled) {
          // Encoder-side privatization happens before any feature leaves the
          // client; everything after it is post-processing.
          RngStream dp_rng = derive_stream(cfg_.seed, {stream_tag::kDp,
                                                       static_cast<std::uint64_t>(t),
                                                       static_cast<std::uint64_t>(id)});
          const Vector g_theta = r.train.update.head(map_.theta_len);
          CompressedUpdate cu =
              privatize_encoder(g_theta, cfg_.feature_fraction, cfg_.dp, dp_rng);
          LayerMap theta_map;
          theta_map.spans.push_back({"theta", 0, map_.theta_len});
          theta_map.dim = map_.theta_len;
          Vector w_flat = flatten(cfg_.model, model_);
          w_flat.head(map_.theta_len) -= cu.dense(theta_map);
          encode_params = unflatten(cfg_.model, w_flat);
        }
        RngStream f_rng = derive_stream(cfg_.seed, {stream_tag::kFeatures,
                                                    static_cast<std::uint64_t>(t),
                                                    static_cast<std::uint64_t>(id)});
        const int count = std::min<int>(cfg_.feature_count_per_client,
                                        static_cast<int>(client.public_idx.size()));
        r.features = extract_features(cfg_.model, encode_params, client.data,
                                      client.public_idx, count, cfg_.feature_bits,
                                      f_rng);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  threads = std::max(1, threads);
  if (threads == 1 || participants.size() <= 1) {
    for (std::size_t i = 0; i < participants.size(); ++i) work(i);
  } else {
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    const int n_workers = std::min<int>(threads, static_cast<int>(participants.size()));
    for (int w = 0; w < n_workers; ++w)
      workers.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < participants.size();
             i = next.fetch_add(1))
          work(i);
      });
    for (std::thread& w : workers) w.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Server phase: aggregate model uploads, then refine on pooled features.
  std::vector<Vector> dense_updates;
  std::vector<double> sizes;
  std::vector<double> losses;
  std::vector<double> nu_events;
  double loss_acc = 0.0;
  for (std::size_t slot = 0; slot < participants.size(); ++slot) {
    const ParticipantResult& r = results[slot];
    loss_acc += r.train.last_loss;
    trace_.max_batch_grad_norm =
        std::max(trace_.max_batch_grad_norm, r.train.max_batch_grad_norm);
    if (!r.uploads_model) continue;
    dense_updates.push_back(r.dense_update);
    sizes.push_back(static_cast<double>(
        clients_[static_cast<std::size_t>(participants[slot])].data.size()));
    losses.push_back(r.train.last_loss);
    if (r.has_nu) nu_events.push_back(r.nu_event);
  }

  Vector weights;
  int scale_total = 0;
  if (cfg_.scheme == WeightScheme::kFedAvg) {
    // Global dataset proportions with the participation correction.
    weights.resize(static_cast<Eigen::Index>(dense_updates.size()));
    Eigen::Index i = 0;
    for (std::size_t slot = 0; slot < participants.size(); ++slot)
      if (results[slot].uploads_model)
        weights[i++] = clients_[static_cast<std::size_t>(participants[slot])].p_k;
    scale_total = cfg_.clients;
  } else {
    // Loss-aware weights are defined over the uploaders themselves.
    weights = aggregation_weights(cfg_.scheme, sizes, losses);
    scale_total = static_cast<int>(dense_updates.size());
  }
  const ModelParams w_half = aggregate(cfg_.model, model_, dense_updates, weights,
                                       scale_total,
                                       static_cast<int>(dense_updates.size()));

  std::vector<RowMatrix> pool;
  for (std::size_t slot = 0; slot < participants.size(); ++slot)
    for (const RowMatrix& y : results[slot].features) pool.push_back(y);

  const bool refine = cfg_.mode == RunMode::kFedSfr && !pool.empty() &&
                      cfg_.server_steps > 0 && eta_s > 0.0;
  double fr_before = 0.0;
  double fr_after = 0.0;
  ModelParams w_next = w_half;
  if (refine) {
    fr_before = probe_fr_loss(w_half, pool, t);
    RngStream s_rng = derive_stream(cfg_.seed, {stream_tag::kServer,
                                                static_cast<std::uint64_t>(t)});
    w_next = server_refine(cfg_.model, cons_, w_half, pool, cfg_.server_steps,
                           eta_s, cfg_.batch_size, cfg_.snr_db, cfg_.alpha_s, s_rng);
    fr_after = probe_fr_loss(w_next, pool, t);
    trace_.fr_loss_pairs.push_back({fr_before, fr_after});
  }

  const Vector b_vec = flatten(cfg_.model, w_half) - flatten(cfg_.model, w_next);
  model_ = std::move(w_next);

  // Memory protocol: uploaders keep what compression dropped; feature
  // senders start the next round clean.
  for (std::size_t slot = 0; slot < participants.size(); ++slot) {
    const int id = participants[slot];
    ClientState& client = clients_[static_cast<std::size_t>(id)];
    const ParticipantResult& r = results[slot];
    if (r.uploads_model)
      client.error_memory = update_error_memory(r.train.update, r.dense_update);
    else
      client.error_memory = Vector::Zero(map_.dim);
  }

  Vector a_vec = Vector::Zero(map_.dim);
  for (const ClientState& c : clients_) a_vec += c.p_k * c.error_memory;
  double ratio = 0.0;
  if (a_vec.squaredNorm() > 0.0 || b_vec.squaredNorm() > 0.0)
    ratio = assumption1_ratio(a_vec, b_vec);

  double nu_round = 1.0;
  if (!nu_events.empty()) {
    nu_round = 0.0;
    for (double nu : nu_events) {
      nu_round += nu;
      trace_.nu_hat_min = std::min(trace_.nu_hat_min, nu);
    }
    nu_round /= static_cast<double>(nu_events.size());
  }

  std::vector<double> mem_norms;
  mem_norms.reserve(clients_.size());
  for (const ClientState& c : clients_) mem_norms.push_back(c.error_memory.squaredNorm());
  trace_.memory_norm2.push_back(std::move(mem_norms));
  trace_.grad_probe_norm2.push_back(probe_grad_norm2());

  double eps_model = 0.0;
  double eps_feat = 0.0;
  if (cfg_.dp.enabled) {
    int kept_model = 0;
    for (const LayerSpan& span : map_.spans)
      kept_model += static_cast<int>(std::ceil(cfg_.model_fraction * span.length));
    const int kept_feat =
        static_cast<int>(std::ceil(cfg_.feature_fraction * map_.theta_len));
    eps_model = epsilon_budget(DpOption::kModelUpload, kept_model, cfg_.dp.clip_q,
                               map_.dim, cfg_.dp.sigma1, cfg_.dp.sigma2);
    eps_feat = epsilon_budget(DpOption::kFeatureUpload, kept_feat, cfg_.dp.clip_q,
                              map_.dim, cfg_.dp.sigma1, cfg_.dp.sigma2);
    eps_cumulative_ += std::max(eps_model, eps_feat);
  }

  MetricsRow row =
      evaluate(t + 1, loss_acc / static_cast<double>(participants.size()), true);
  row.eps_model_upload = eps_model;
  row.eps_feature_upload = eps_feat;
  row.fr_improved = refine && fr_after < fr_before;
  row.eps_ratio_assumption1 = ratio;
  row.nu_hat = nu_round;
  trace_.rows.push_back(row);
  ++round_;
}

MetricsTrace Experiment::run(int threads) {
  init();
  for (int t = 0; t < cfg_.rounds; ++t) step(threads);
  return trace_;
}

}  // namespace fedsfr
