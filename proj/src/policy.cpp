#include "rlrelax/policy.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace rlrelax {

namespace {

Dense make_dense(const std::string& name, int in, int out, bool bias, double gain, RngStream& rng) {
  if (in <= 0 || out <= 0) throw std::invalid_argument("policy: layer widths must be positive");
  const double bound = gain * std::sqrt(3.0 / in);
  Matrix w(in, out);
  for (int r = 0; r < in; ++r) {
    for (int c = 0; c < out; ++c) w(r, c) = rng.uniform(-bound, bound);
  }
  Dense d;
  d.weight = ad::Parameter(name + ".weight", std::move(w));
  d.has_bias = bias;
  if (bias) d.bias = ad::Parameter(name + ".bias", Matrix::Zero(1, out));
  return d;
}

Mlp make_mlp(const std::string& name, int in, int hidden, int out, int layers, double gain,
             RngStream& rng, double last_gain = 1.0) {
  if (layers < 1) throw std::invalid_argument("policy: an MLP needs at least one layer");
  Mlp m;
  for (int l = 0; l < layers; ++l) {
    const int fan_in = l == 0 ? in : hidden;
    const int fan_out = l == layers - 1 ? out : hidden;
    m.layers.push_back(make_dense(fmt::format("{}.{}", name, l), fan_in, fan_out, true,
                                  gain * (l == layers - 1 ? last_gain : 1.0), rng));
  }
  return m;
}

template <typename Fn>
void for_each_dense(PolicyParameters& p, Fn&& fn) {
  for (auto& d : p.node_embed.layers) fn(d);
  for (auto& d : p.edge_embed.layers) fn(d);
  for (auto& r : p.rounds) {
    fn(r.node_message);
    fn(r.edge_message);
    for (auto& d : r.node_update.layers) fn(d);
    for (auto& d : r.edge_update.layers) fn(d);
  }
  for (auto& d : p.head.layers) fn(d);
}

ad::Var bind(ad::Tape& tape, ad::Parameter& p, bool track) {
  return track ? tape.parameter(p) : tape.constant(p.value);
}

ad::Var linear(ad::Tape& tape, Dense& d, ad::Var x, bool track) {
  ad::Var y = ad::matmul(x, bind(tape, d.weight, track));
  if (d.has_bias) y = ad::add_row(y, bind(tape, d.bias, track));
  return y;
}

ad::Var mlp(ad::Tape& tape, Mlp& m, ad::Var x, double slope, bool track) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    x = linear(tape, m.layers[l], x, track);
    if (l + 1 < m.layers.size()) x = ad::leaky_relu(x, slope);
  }
  return x;
}

std::string config_text(const PolicyConfig& c) {
  return fmt::format(
      "node_features {}\nedge_features {}\nwidth {}\ndim {}\nmessage_passing_steps {}\n"
      "node_embed_layers {}\nedge_embed_layers {}\nnode_update_layers {}\nedge_update_layers {}\n"
      "head_layers {}\nleaky_slope {:a}\naggregation {}\nhead_neighbor_mean {}\n"
      "displacement_scale {:a}\nbatchnorm_decay {:a}\ninit_gain {:a}\nhead_init_gain {:a}\n",
      c.node_features, c.edge_features, c.width, c.dim, c.message_passing_steps,
      c.node_embed_layers, c.edge_embed_layers, c.node_update_layers, c.edge_update_layers,
      c.head_layers, c.leaky_slope, c.aggregation == Aggregation::Mean ? "mean" : "sum",
      c.head_neighbor_mean ? 1 : 0, c.displacement_scale, c.batchnorm_decay, c.init_gain, c.head_init_gain);
}

void write_values(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += fmt::format("{}{:a}", (r == 0 && c == 0) ? "" : " ", m(r, c));
    }
  }
  out += '\n';
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw InputError("checkpoint: bad number '" + tok + "'");
  return v;
}

}  // namespace

PolicyParameters init_params(const PolicyConfig& c, RngStream& rng) {
  if (c.width <= 0 || c.node_features <= 0 || c.edge_features <= 0 || c.dim <= 0) {
    throw std::invalid_argument("policy: widths must be positive");
  }
  if (c.message_passing_steps < 0) throw std::invalid_argument("policy: negative message passing steps");
  PolicyParameters p;
  p.config = c;
  const int H = c.width;
  const double g = c.init_gain;
  p.bn_gamma = ad::Parameter("bn.gamma", Matrix::Ones(1, c.node_features));
  p.bn_beta = ad::Parameter("bn.beta", Matrix::Zero(1, c.node_features));
  p.bn = ad::BatchNormState(c.node_features);
  p.bn.decay = c.batchnorm_decay;
  p.node_embed = make_mlp("node_embed", c.node_features, H, H, c.node_embed_layers, g, rng);
  p.edge_embed = make_mlp("edge_embed", c.edge_features, H, H, c.edge_embed_layers, g, rng);
  for (int l = 0; l < c.message_passing_steps; ++l) {
    MessageRound r;
    r.node_message = make_dense(fmt::format("round{}.node_message", l), 2 * H, H, false, g, rng);
    r.edge_message = make_dense(fmt::format("round{}.edge_message", l), 2 * H, H, false, g, rng);
    r.node_update = make_mlp(fmt::format("round{}.node_update", l), 2 * H, H, H,
                             c.node_update_layers, g, rng);
    r.edge_update = make_mlp(fmt::format("round{}.edge_update", l), 2 * H, H, H,
                             c.edge_update_layers, g, rng);
    p.rounds.push_back(std::move(r));
  }
  p.head = make_mlp("head", c.head_neighbor_mean ? 2 * H : H, H, c.dim, c.head_layers, g, rng,
                    c.head_init_gain);
  return p;
}

std::vector<ad::Parameter*> PolicyParameters::parameters() {
  std::vector<ad::Parameter*> out{&bn_gamma, &bn_beta};
  for_each_dense(*this, [&](Dense& d) {
    out.push_back(&d.weight);
    if (d.has_bias) out.push_back(&d.bias);
  });
  return out;
}

std::vector<const ad::Parameter*> PolicyParameters::parameters() const {
  auto mut = const_cast<PolicyParameters*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t PolicyParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void PolicyParameters::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

double PolicyParameters::grad_norm() const {
  double s = 0.0;
  for (const auto* p : parameters()) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

std::string PolicyParameters::serialize() const {
  std::string out = "rlrelax-policy 1\n";
  out += config_text(config);
  out += fmt::format("bn_ema {}\n", bn.ema_mean.size());
  write_values(out, bn.ema_mean.transpose());
  write_values(out, bn.ema_var.transpose());
  const auto params = parameters();
  out += fmt::format("tensors {}\n", params.size());
  for (const auto* p : params) {
    out += fmt::format("tensor {} {} {}\n", p->name, p->value.rows(), p->value.cols());
    write_values(out, p->value);
  }
  out += "end\n";
  return out;
}

PolicyParameters PolicyParameters::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "rlrelax-policy 1") {
    throw InputError("checkpoint: unrecognized header");
  }
  std::map<std::string, std::string> kv;
  for (int k = 0; k < 17; ++k) {
    if (!std::getline(in, line)) throw InputError("checkpoint: truncated config block");
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    kv[key] = value;
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError(std::string("checkpoint: missing config key ") + key);
    return it->second;
  };
  PolicyConfig c;
  c.node_features = std::stoi(get("node_features"));
  c.edge_features = std::stoi(get("edge_features"));
  c.width = std::stoi(get("width"));
  c.dim = std::stoi(get("dim"));
  c.message_passing_steps = std::stoi(get("message_passing_steps"));
  c.node_embed_layers = std::stoi(get("node_embed_layers"));
  c.edge_embed_layers = std::stoi(get("edge_embed_layers"));
  c.node_update_layers = std::stoi(get("node_update_layers"));
  c.edge_update_layers = std::stoi(get("edge_update_layers"));
  c.head_layers = std::stoi(get("head_layers"));
  c.leaky_slope = parse_double(get("leaky_slope"));
  c.aggregation = get("aggregation") == "sum" ? Aggregation::Sum : Aggregation::Mean;
  c.head_neighbor_mean = get("head_neighbor_mean") == "1";
  c.displacement_scale = parse_double(get("displacement_scale"));
  c.batchnorm_decay = parse_double(get("batchnorm_decay"));
  c.init_gain = parse_double(get("init_gain"));
  c.head_init_gain = parse_double(get("head_init_gain"));

  RngStream dummy(0);
  PolicyParameters p = init_params(c, dummy);

  auto read_row = [&](Eigen::Index count) {
    if (!std::getline(in, line)) throw InputError("checkpoint: truncated values");
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) vals.push_back(parse_double(tok));
    if (static_cast<Eigen::Index>(vals.size()) != count) {
      throw InputError("checkpoint: value count does not match shape");
    }
    return vals;
  };
  std::string word;
  Eigen::Index nbn = 0;
  if (!std::getline(in, line)) throw InputError("checkpoint: missing batch-norm block");
  std::istringstream(line) >> word >> nbn;
  if (word != "bn_ema" || nbn != c.node_features) throw InputError("checkpoint: bad batch-norm block");
  auto mean = read_row(nbn);
  auto var = read_row(nbn);
  p.bn.ema_mean = Eigen::Map<Vector>(mean.data(), nbn);
  p.bn.ema_var = Eigen::Map<Vector>(var.data(), nbn);

  std::size_t count = 0;
  if (!std::getline(in, line)) throw InputError("checkpoint: missing tensor count");
  std::istringstream(line) >> word >> count;
  auto params = p.parameters();
  if (word != "tensors" || count != params.size()) {
    throw InputError("checkpoint: tensor manifest does not match the architecture");
  }
  for (auto* param : params) {
    if (!std::getline(in, line)) throw InputError("checkpoint: truncated tensor list");
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    std::istringstream(line) >> word >> name >> rows >> cols;
    if (word != "tensor" || name != param->name || rows != param->value.rows() ||
        cols != param->value.cols()) {
      throw InputError("checkpoint: unexpected tensor '" + name + "'");
    }
    auto vals = read_row(rows * cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index col = 0; col < cols; ++col) param->value(r, col) = vals[r * cols + col];
    }
    param->zero_grad();
  }
  if (!std::getline(in, line) || line != "end") throw InputError("checkpoint: missing end marker");
  return p;
}

void PolicyParameters::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << serialize();
}

PolicyParameters PolicyParameters::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

ad::Var forward(PolicyParameters& p, const GraphState& state, ad::Tape& tape, ad::Mode mode,
                bool track) {
  const PolicyConfig& c = p.config;
  const int n = static_cast<int>(state.node_features.rows());
  if (state.node_features.cols() != c.node_features ||
      (state.edge_features.rows() > 0 && state.edge_features.cols() != c.edge_features) ||
      state.graph.n_nodes != n) {
    throw std::invalid_argument("policy: state feature widths do not match the parameters");
  }
  const double slope = c.leaky_slope;
  const auto senders = ad::make_index(state.graph.senders);
  const auto receivers = ad::make_index(state.graph.receivers);
  Matrix edge_in = state.edge_features;
  if (edge_in.rows() == 0) edge_in.resize(0, c.edge_features);

  ad::Var x = tape.constant(state.node_features);
  x = ad::batchnorm(x, bind(tape, p.bn_gamma, track), bind(tape, p.bn_beta, track), p.bn, mode);
  ad::Var h = mlp(tape, p.node_embed, x, slope, track);
  ad::Var he = mlp(tape, p.edge_embed, tape.constant(std::move(edge_in)), slope, track);

  for (auto& round : p.rounds) {
    ad::Var hu = ad::gather(h, senders);
    ad::Var hv = ad::gather(h, receivers);
    ad::Var msg = linear(tape, round.node_message, ad::concat({hu, he}), track);
    ad::Var agg = c.aggregation == Aggregation::Mean ? ad::segment_mean(msg, receivers, n)
                                                     : ad::segment_sum(msg, receivers, n);
    ad::Var h_next =
        ad::leaky_relu(mlp(tape, round.node_update, ad::concat({h, agg}), slope, track), slope);
    ad::Var emsg = linear(tape, round.edge_message, ad::concat({hv, hu}), track);
    he = ad::leaky_relu(mlp(tape, round.edge_update, ad::concat({he, emsg}), slope, track), slope);
    h = h_next;
  }

  ad::Var head_in = h;
  if (c.head_neighbor_mean) {
    head_in = ad::concat({h, ad::segment_mean(ad::gather(h, senders), receivers, n)});
  }
  return ad::scale(mlp(tape, p.head, head_in, slope, track), c.displacement_scale);
}

Matrix predict(PolicyParameters& params, const GraphState& state, ad::Mode mode) {
  ad::Tape tape;
  return forward(params, state, tape, mode, false).value();
}

Matrix sample_action(const Matrix& mu, double alpha, RngStream& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_action: alpha must be positive");
  const double s = std::sqrt(alpha);
  Matrix a = mu;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) a(i, k) += s * rng.normal();
  }
  return a;
}

double log_prob(const Matrix& actions, const Matrix& mu, double alpha) {
  ad::Tape tape;
  return ad::gaussian_log_prob(tape.constant(mu), actions, alpha).scalar();
}

}  // namespace rlrelax
