#include "crowdsim/beliefnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "crowdsim/dataset.hpp"
#include "crowdsim/error.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

VectorXd as_vector(std::span<const double> s) {
  return Eigen::Map<const VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

VectorXd tanh_of(const VectorXd& v) { return v.array().tanh().matrix(); }

VectorXd tanh_grad(const VectorXd& y) { return (1.0 - y.array().square()).matrix(); }

void glorot(MatrixXd& m, Rng& rng) {
  if (m.size() == 0) return;
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
}

// Forward state of the encoder for one (x, v) pair.
struct EncoderPass {
  VectorXd gx, gz, c, h, mu, pre_lv, lv, sd;
};

EncoderPass run_encoder(const BeliefNet& net, const VectorXd& x, const VectorXd& v) {
  const auto e = static_cast<Eigen::Index>(net.dims().embedding);
  EncoderPass p;
  p.gx = tanh_of(net.wx * x + net.bx.col(0));
  p.gz = tanh_of(net.wz * v + net.bz.col(0));
  p.c.resize(2 * e);
  p.c << p.gx, p.gz;
  p.h = tanh_of(net.we * p.c + net.be.col(0));
  p.mu = net.wmu * p.h + net.bmu.col(0);
  p.pre_lv = net.wlv * p.h + net.blv.col(0);
  p.lv = p.pre_lv.cwiseMax(BeliefNet::kMinLogVariance).cwiseMin(BeliefNet::kMaxLogVariance);
  p.sd = (0.5 * p.lv.array()).exp().matrix();
  return p;
}

void check_dims(const BeliefNet& net, std::size_t dx, std::size_t dz) {
  if (dx != net.dims().feature_dim)
    throw std::invalid_argument("feature vector has length " + std::to_string(dx) + ", net expects " +
                                std::to_string(net.dims().feature_dim));
  if (dz != net.dims().profile_dim)
    throw std::invalid_argument("profile vector has length " + std::to_string(dz) + ", net expects " +
                                std::to_string(net.dims().profile_dim));
}

}  // namespace

BeliefNet BeliefNet::zeros(const BeliefNetDims& d) {
  if (d.feature_dim == 0 || d.embedding == 0 || d.hidden == 0 || d.belief_dim == 0 || d.output_dim == 0)
    throw ConfigError("belief net dimensions must be positive (profile_dim may be 0)");
  const auto dx = static_cast<Eigen::Index>(d.feature_dim), dz = static_cast<Eigen::Index>(d.profile_dim),
             e = static_cast<Eigen::Index>(d.embedding), h = static_cast<Eigen::Index>(d.hidden),
             db = static_cast<Eigen::Index>(d.belief_dim), o = static_cast<Eigen::Index>(d.output_dim);
  BeliefNet n;
  n.dims_ = d;
  n.wx = MatrixXd::Zero(e, dx);
  n.bx = MatrixXd::Zero(e, 1);
  n.wz = MatrixXd::Zero(e, dz);
  n.bz = MatrixXd::Zero(e, 1);
  n.we = MatrixXd::Zero(h, 2 * e);
  n.be = MatrixXd::Zero(h, 1);
  n.wmu = MatrixXd::Zero(db, h);
  n.bmu = MatrixXd::Zero(db, 1);
  n.wlv = MatrixXd::Zero(db, h);
  n.blv = MatrixXd::Zero(db, 1);
  n.wd = MatrixXd::Zero(h, db + e);
  n.bd = MatrixXd::Zero(h, 1);
  n.wo = MatrixXd::Zero(dx, h);
  n.bo = MatrixXd::Zero(dx, 1);
  n.readout = MatrixXd::Zero(o, db);
  return n;
}

BeliefNet BeliefNet::random(const BeliefNetDims& dims, std::uint64_t seed) {
  BeliefNet n = zeros(dims);
  std::uint64_t k = 0;
  for (auto& p : n.parameters()) {
    if (p.value->cols() == 1 && p.name.front() == 'b') continue;
    Rng rng(derive_seed(seed, {0x696e6974, k++}));
    glorot(*p.value, rng);
  }
  return n;
}

std::vector<BeliefNet::Param> BeliefNet::parameters() {
  return {{"wx", &wx},   {"bx", &bx},   {"wz", &wz},   {"bz", &bz},   {"we", &we},
          {"be", &be},   {"wmu", &wmu}, {"bmu", &bmu}, {"wlv", &wlv}, {"blv", &blv},
          {"wd", &wd},   {"bd", &bd},   {"wo", &wo},   {"bo", &bo},   {"readout", &readout}};
}

std::vector<BeliefNet::ConstParam> BeliefNet::parameters() const {
  std::vector<ConstParam> out;
  for (auto& p : const_cast<BeliefNet*>(this)->parameters()) out.push_back({p.name, p.value});
  return out;
}

std::size_t BeliefNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value->size());
  return n;
}

bool BeliefNet::finite() const {
  for (const auto& p : parameters())
    if (!p.value->allFinite()) return false;
  return true;
}

BeliefEncoding BeliefNet::encode(std::span<const double> features, std::span<const double> profile) const {
  check_dims(*this, features.size(), profile.size());
  const auto p = run_encoder(*this, as_vector(features), as_vector(profile));
  return {p.mu, p.lv.array().exp().matrix(), p.lv};
}

VectorXd BeliefNet::sample_belief(std::span<const double> features, std::span<const double> profile,
                                  std::uint64_t seed) const {
  const auto enc = encode(features, profile);
  Rng rng(seed);
  VectorXd delta(enc.mean.size());
  for (Eigen::Index k = 0; k < delta.size(); ++k)
    delta[k] = enc.mean[k] + std::exp(0.5 * enc.log_variance[k]) * rng.normal();
  return delta;
}

VectorXd BeliefNet::decode(const VectorXd& belief, std::span<const double> profile) const {
  if (static_cast<std::size_t>(belief.size()) != dims_.belief_dim)
    throw std::invalid_argument("belief has wrong dimension");
  check_dims(*this, dims_.feature_dim, profile.size());
  const VectorXd gz = tanh_of(wz * as_vector(profile) + bz.col(0));
  VectorXd in(belief.size() + gz.size());
  in << belief, gz;
  return wo * tanh_of(wd * in + bd.col(0)) + bo.col(0);
}

VectorXd BeliefNet::effect(const VectorXd& belief) const {
  if (static_cast<std::size_t>(belief.size()) != dims_.belief_dim)
    throw std::invalid_argument("belief has wrong dimension");
  return readout * belief;
}

MatrixXd BeliefNet::mean_jacobian(std::span<const double> features, std::span<const double> profile) const {
  check_dims(*this, features.size(), profile.size());
  const auto p = run_encoder(*this, as_vector(features), as_vector(profile));
  const auto e = static_cast<Eigen::Index>(dims_.embedding);
  const MatrixXd dh = tanh_grad(p.h).asDiagonal() * we.leftCols(e) * tanh_grad(p.gx).asDiagonal() * wx;
  return wmu * dh;
}

void TrainingSet::normalise_weights() {
  std::map<std::size_t, std::size_t> tasks;
  for (const auto& e : entries) ++tasks[e.participant];
  const double n = static_cast<double>(tasks.size());
  for (auto& e : entries) e.weight = 1.0 / (n * static_cast<double>(tasks[e.participant]));
}

std::size_t output_dim_for(const ProblemSet& problems) {
  std::size_t m = 0;
  for (const auto& p : problems.problems()) {
    if (p.scale.kind() != ScaleKind::choice) continue;
    if (m != 0 && m != p.scale.size()) throw ConfigError("choice problems must share the number of alternatives");
    m = p.scale.size();
  }
  if (m != 0) {
    for (const auto& p : problems.problems())
      if (p.scale.kind() != ScaleKind::choice) throw ConfigError("cannot mix choice and numeric problems in one net");
    return m;
  }
  return 1;
}

namespace {

VectorXd decision_vector(const DecisionScale& scale, double value, std::size_t out_dim) {
  if (scale.kind() != ScaleKind::choice) return VectorXd::Constant(1, value);
  VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(out_dim));
  v[static_cast<Eigen::Index>(scale.index_of(value))] = 1.0;
  return v;
}

}  // namespace

TrainingSet make_training_set(const ProblemSet& problems, const ResponseMatrix& responses,
                              const std::map<std::string, std::vector<double>>& profiles,
                              const std::map<std::string, double>& reference) {
  const std::size_t out_dim = output_dim_for(problems);
  TrainingSet set;
  for (const auto& p : problems.problems()) {
    set.features.push_back(as_vector(p.features));
    auto it = reference.find(p.id);
    set.reference.push_back(it == reference.end() ? VectorXd() : decision_vector(p.scale, it->second, out_dim));
  }
  for (const auto& id : responses.participants()) {
    auto it = profiles.find(id);
    if (it == profiles.end()) throw std::invalid_argument("no profile for participant '" + id + "'");
    set.profiles.push_back(as_vector(it->second));
  }
  std::map<std::string, std::size_t, std::less<>> pidx;
  for (std::size_t i = 0; i < responses.participants().size(); ++i) pidx[responses.participants()[i]] = i;
  for (const auto& r : responses.responses()) {
    const std::size_t t = problems.index_of(r.problem_id);
    if (set.reference[t].size() == 0)
      throw std::invalid_argument("problem '" + r.problem_id + "' has no reference decision");
    const auto& scale = problems.problems()[t].scale;
    set.entries.push_back({t, pidx.at(r.participant_id), decision_vector(scale, r.value, out_dim), 0.0});
  }
  set.normalise_weights();
  return set;
}

double kl_standard_normal(const VectorXd& mean, const VectorXd& log_variance) {
  return 0.5 * (mean.array().square() + log_variance.array().exp() - 1.0 - log_variance.array()).sum();
}

LossBreakdown evaluate_loss(const BeliefNet& net, const TrainingSet& data, const LossOptions& options,
                            std::uint64_t seed, BeliefNet* gradient, std::span<const std::size_t> entries,
                            double scale) {
  options.blender.validate();
  const auto& d = net.dims();
  const int J = options.blender.samples;
  const bool noisy = options.blender.family == NoiseFamily::normal && options.blender.sigma > 0.0;
  const auto db = static_cast<Eigen::Index>(d.belief_dim), e = static_cast<Eigen::Index>(d.embedding);

  std::vector<std::size_t> all;
  if (entries.empty()) {
    all.resize(data.entries.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    entries = all;
  }

  LossBreakdown out;
  for (const std::size_t k : entries) {
    const auto& en = data.entries.at(k);
    const VectorXd& x = data.features.at(en.problem);
    const VectorXd& v = data.profiles.at(en.participant);
    const VectorXd& ref = data.reference.at(en.problem);
    check_dims(net, static_cast<std::size_t>(x.size()), static_cast<std::size_t>(v.size()));
    if (ref.size() == 0) throw std::invalid_argument("problem lacks a reference decision");
    if (static_cast<std::size_t>(ref.size()) != d.output_dim || en.target.size() != ref.size())
      throw std::invalid_argument("decision vector has wrong dimension");
    const double w = en.weight;

    const auto p = run_encoder(net, x, v);
    const double kl = kl_standard_normal(p.mu, p.lv);

    Rng rng(derive_seed(seed, {k}));
    std::vector<VectorXd> zeta(J), delta(J), dec_in(J), hd(J), xhat(J);
    VectorXd pred = ref;
    double recon = 0.0;
    for (int j = 0; j < J; ++j) {
      zeta[j].resize(db);
      for (Eigen::Index q = 0; q < db; ++q) zeta[j][q] = rng.normal();
      delta[j] = p.mu + p.sd.cwiseProduct(zeta[j]);
      dec_in[j].resize(db + e);
      dec_in[j] << delta[j], p.gz;
      hd[j] = tanh_of(net.wd * dec_in[j] + net.bd.col(0));
      xhat[j] = net.wo * hd[j] + net.bo.col(0);
      recon += 0.5 * (x - xhat[j]).squaredNorm() + static_cast<double>(d.feature_dim) * kHalfLog2Pi;
      VectorXd contrib = net.readout * delta[j];
      if (noisy)
        for (Eigen::Index q = 0; q < contrib.size(); ++q) contrib[q] += options.blender.sigma * rng.normal();
      pred += contrib / J;
    }
    recon /= J;
    const VectorXd resid = pred - en.target;
    const double l2 = resid.squaredNorm();

    out.kl += w * kl;
    out.reconstruction += w * recon;
    out.l2 += w * l2;

    if (!gradient) continue;
    BeliefNet& g = *gradient;
    const double s = w * scale;

    const VectorXd dpred = 2.0 * options.lambda * s * resid;
    VectorXd dmu = s * p.mu;
    VectorXd dlv = 0.5 * s * (p.lv.array().exp() - 1.0).matrix();
    VectorXd dgz = VectorXd::Zero(e);
    for (int j = 0; j < J; ++j) {
      VectorXd ddelta = net.readout.transpose() * dpred / J;
      g.readout += dpred * delta[j].transpose() / J;

      const VectorXd dxhat = (s / J) * (xhat[j] - x);
      g.wo += dxhat * hd[j].transpose();
      g.bo.col(0) += dxhat;
      const VectorXd dpre = (net.wo.transpose() * dxhat).cwiseProduct(tanh_grad(hd[j]));
      g.wd += dpre * dec_in[j].transpose();
      g.bd.col(0) += dpre;
      const VectorXd din = net.wd.transpose() * dpre;
      ddelta += din.head(db);
      dgz += din.tail(e);

      dmu += ddelta;
      dlv += 0.5 * ddelta.cwiseProduct(zeta[j]).cwiseProduct(p.sd);
    }
    VectorXd dpre_lv = dlv;
    for (Eigen::Index q = 0; q < dpre_lv.size(); ++q)
      if (p.pre_lv[q] < BeliefNet::kMinLogVariance || p.pre_lv[q] > BeliefNet::kMaxLogVariance) dpre_lv[q] = 0.0;

    g.wmu += dmu * p.h.transpose();
    g.bmu.col(0) += dmu;
    g.wlv += dpre_lv * p.h.transpose();
    g.blv.col(0) += dpre_lv;
    const VectorXd dpre_h = (net.wmu.transpose() * dmu + net.wlv.transpose() * dpre_lv).cwiseProduct(tanh_grad(p.h));
    g.we += dpre_h * p.c.transpose();
    g.be.col(0) += dpre_h;
    const VectorXd dc = net.we.transpose() * dpre_h;
    dgz += dc.tail(e);
    const VectorXd dpre_x = dc.head(e).cwiseProduct(tanh_grad(p.gx));
    g.wx += dpre_x * x.transpose();
    g.bx.col(0) += dpre_x;
    const VectorXd dpre_z = dgz.cwiseProduct(tanh_grad(p.gz));
    g.wz += dpre_z * v.transpose();
    g.bz.col(0) += dpre_z;
  }
  out.l1 = out.kl + out.reconstruction;
  out.total = out.l1 + options.lambda * out.l2;
  return out;
}

double elbo_loss(const BeliefNet& net, const TrainingSet& data, int belief_samples, std::uint64_t seed) {
  LossOptions opt;
  opt.lambda = 0.0;
  opt.blender.family = NoiseFamily::none;
  opt.blender.samples = belief_samples;
  return evaluate_loss(net, data, opt, seed).l1;
}

double decision_loss(const BeliefNet& net, const TrainingSet& data, const BlenderConfig& blender, std::uint64_t seed) {
  LossOptions opt;
  opt.blender = blender;
  return evaluate_loss(net, data, opt, seed).l2;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  blender.validate();
}

TrainResult train(BeliefNet net, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.entries.empty()) throw std::invalid_argument("training set is empty");
  const LossOptions opt{cfg.lambda, cfg.blender};
  const std::uint64_t eval_seed = derive_seed(cfg.seed, {0x6576616c});

  TrainResult result;
  auto record = [&](int epoch) {
    const auto l = evaluate_loss(net, data, opt, eval_seed);
    if (!std::isfinite(l.total)) throw DivergenceError("non-finite training loss", epoch);
    result.trace.push_back({epoch, l.l1, l.l2, l.total});
  };
  record(0);

  BeliefNet m = net.zeros_like(), v = net.zeros_like();
  auto params = net.parameters();
  auto mp = m.parameters();
  auto vp = v.parameters();
  const std::size_t n = data.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, {0x73687566, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      BeliefNet grad = net.zeros_like();
      const auto step_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), batch});
      const auto l = evaluate_loss(net, data, opt, step_seed, &grad, idx,
                                   static_cast<double>(n) / static_cast<double>(idx.size()));
      if (!std::isfinite(l.total) || !grad.finite()) throw DivergenceError("non-finite training loss", epoch);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto gp = grad.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& mk = *mp[k].value;
        auto& vk = *vp[k].value;
        const auto& gk = *gp[k].value;
        mk = cfg.beta1 * mk + (1.0 - cfg.beta1) * gk;
        vk = cfg.beta2 * vk + (1.0 - cfg.beta2) * gk.cwiseProduct(gk);
        params[k].value->array() -=
            cfg.learning_rate * (mk.array() / c1) / ((vk.array() / c2).sqrt() + cfg.adam_epsilon);
      }
    }
    record(epoch);
  }
  result.net = std::move(net);
  return result;
}

nlohmann::json to_json(const BeliefNetDims& d) {
  return {{"feature_dim", d.feature_dim}, {"profile_dim", d.profile_dim}, {"embedding", d.embedding},
          {"hidden", d.hidden},           {"belief_dim", d.belief_dim},   {"output_dim", d.output_dim}};
}

BeliefNetDims dims_from_json(const nlohmann::json& j) {
  BeliefNetDims d;
  d.feature_dim = j.value("feature_dim", d.feature_dim);
  d.profile_dim = j.value("profile_dim", d.profile_dim);
  d.embedding = j.value("embedding", d.embedding);
  d.hidden = j.value("hidden", d.hidden);
  d.belief_dim = j.value("belief_dim", d.belief_dim);
  d.output_dim = j.value("output_dim", d.output_dim);
  return d;
}

void save_checkpoint(const BeliefNet& net, const nlohmann::json& config, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dims"] = to_json(net.dims());
  j["config"] = config;
  nlohmann::ordered_json params;
  for (const auto& p : net.parameters()) {
    nlohmann::ordered_json t;
    t["rows"] = p.value->rows();
    t["cols"] = p.value->cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p.value->size()));
    for (Eigen::Index r = 0; r < p.value->rows(); ++r)
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) data.push_back((*p.value)(r, c));
    t["data"] = data;
    params[p.name] = t;
  }
  j["parameters"] = params;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

BeliefNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
  BeliefNet net = BeliefNet::zeros(dims_from_json(j.at("dims")));
  for (auto& p : net.parameters()) {
    const auto& t = j.at("parameters").at(p.name);
    const auto rows = t.at("rows").get<Eigen::Index>(), cols = t.at("cols").get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (rows != p.value->rows() || cols != p.value->cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw DataError("checkpoint tensor '" + p.name + "' has the wrong shape");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) (*p.value)(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return net;
}

void save_loss_trace(const std::vector<EpochLoss>& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "epoch,L1,L2,total\n";
  for (const auto& e : trace)
    out << e.epoch << ',' << format_number(e.l1) << ',' << format_number(e.l2) << ',' << format_number(e.total) << '\n';
}

}  // namespace crowdsim
