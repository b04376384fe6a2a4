#include "snake/nn.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace snake {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Orthogonal rows/columns from the QR of a Gaussian matrix; the sign of the
// R diagonal is folded into Q so the distribution is Haar-uniform.
Eigen::MatrixXd orthogonal(int rows, int cols, double gain, Rng& rng) {
  const int r = std::max(rows, cols);
  const int c = std::min(rows, cols);
  Eigen::MatrixXd g(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      g(i, j) = rng.normal();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd qr_mat = qr.matrixQR();
  for (int j = 0; j < c; ++j) {
    if (qr_mat(j, j) < 0.0) {
      q.col(j) = -q.col(j);
    }
  }
  if (rows < cols) {
    return gain * q.transpose();
  }
  return gain * q;
}

bool last_layer_tanh(const Mlp& net, std::size_t layer) {
  return layer + 1 < net.weights.size() ||
         net.output_activation == OutputActivation::Tanh;
}

}  // namespace

Mlp make_mlp(int in_dim, int out_dim, OutputActivation act, Rng& rng,
             double out_gain) {
  if (in_dim < 1 || out_dim < 1) {
    throw std::invalid_argument("make_mlp: dimensions must be positive");
  }
  Mlp net;
  net.in_dim = in_dim;
  net.out_dim = out_dim;
  net.output_activation = act;
  std::vector<int> sizes{in_dim};
  sizes.insert(sizes.end(), Mlp::kHidden.begin(), Mlp::kHidden.end());
  sizes.push_back(out_dim);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    const double gain = last ? out_gain : 1.0;
    net.weights.push_back(orthogonal(sizes[l + 1], sizes[l], gain, rng));
    net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x,
                        ForwardCache* cache) {
  if (x.cols() != net.in_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->post.clear();
    cache->post.reserve(net.weights.size());
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::MatrixXd z = h * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    if (last_layer_tanh(net, l)) {
      h = z.array().tanh().matrix();
    } else {
      h = std::move(z);
    }
    if (cache != nullptr) {
      cache->post.push_back(h);
    }
  }
  return h;
}

Eigen::VectorXd forward_one(const Mlp& net, const Eigen::VectorXd& x) {
  return forward(net, x.transpose()).row(0).transpose();
}

MlpGrads backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& upstream,
                  Eigen::MatrixXd* input_grad) {
  const int layers = static_cast<int>(net.weights.size());
  if (static_cast<int>(cache.post.size()) != layers ||
      cache.input.cols() != net.in_dim ||
      upstream.rows() != cache.input.rows() || upstream.cols() != net.out_dim) {
    throw std::invalid_argument("backward: cache does not match this net");
  }
  MlpGrads grads = zero_grads(net);
  Eigen::MatrixXd delta;  // d(objective)/d(pre-activation) of the current layer
  for (int l = layers - 1; l >= 0; --l) {
    Eigen::MatrixXd grad_h =
        (l == layers - 1) ? upstream : Eigen::MatrixXd(delta * net.weights[l + 1]);
    if (last_layer_tanh(net, static_cast<std::size_t>(l))) {
      delta = (grad_h.array() * (1.0 - cache.post[l].array().square())).matrix();
    } else {
      delta = std::move(grad_h);
    }
    const Eigen::MatrixXd& prev = (l == 0) ? cache.input : cache.post[l - 1];
    grads.weights[l].noalias() = delta.transpose() * prev;
    grads.biases[l] = delta.colwise().sum().transpose();
  }
  if (input_grad != nullptr) {
    *input_grad = delta * net.weights[0];
  }
  return grads;
}

Eigen::MatrixXd forward_jvp(const Mlp& net, const ForwardCache& cache,
                            const MlpGrads& dir) {
  const std::size_t layers = net.weights.size();
  if (cache.post.size() != layers || dir.weights.size() != layers) {
    throw std::invalid_argument("forward_jvp: cache/direction mismatch");
  }
  Eigen::MatrixXd dh;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& prev = (l == 0) ? cache.input : cache.post[l - 1];
    Eigen::MatrixXd dz = prev * dir.weights[l].transpose();
    if (l > 0) {
      dz.noalias() += dh * net.weights[l].transpose();
    }
    dz.rowwise() += dir.biases[l].transpose();
    if (last_layer_tanh(net, l)) {
      dh = (dz.array() * (1.0 - cache.post[l].array().square())).matrix();
    } else {
      dh = std::move(dz);
    }
  }
  return dh;
}

MlpGrads zero_grads(const Mlp& net) {
  MlpGrads grads;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    grads.weights.push_back(
        Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    grads.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return grads;
}

int flat_size(const Mlp& net) {
  int n = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    n += static_cast<int>(net.weights[l].size() + net.biases[l].size());
  }
  return n;
}

Eigen::VectorXd to_flat(const Mlp& net) {
  Eigen::VectorXd flat(flat_size(net));
  int k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Eigen::MatrixXd& w = net.weights[l];
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        flat[k++] = w(r, c);
      }
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      flat[k++] = net.biases[l][i];
    }
  }
  return flat;
}

void from_flat(Mlp& net, const Eigen::VectorXd& flat) {
  if (flat.size() != flat_size(net)) {
    throw std::invalid_argument("from_flat: size mismatch");
  }
  int k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::MatrixXd& w = net.weights[l];
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        w(r, c) = flat[k++];
      }
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      net.biases[l][i] = flat[k++];
    }
  }
}

Eigen::VectorXd grads_to_flat(const Mlp& net, const MlpGrads& grads) {
  Eigen::VectorXd flat(flat_size(net));
  int k = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const Eigen::MatrixXd& w = grads.weights[l];
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        flat[k++] = w(r, c);
      }
    }
    for (int i = 0; i < grads.biases[l].size(); ++i) {
      flat[k++] = grads.biases[l][i];
    }
  }
  return flat;
}

MlpGrads grads_from_flat(const Mlp& net, const Eigen::VectorXd& flat) {
  if (flat.size() != flat_size(net)) {
    throw std::invalid_argument("grads_from_flat: size mismatch");
  }
  MlpGrads grads = zero_grads(net);
  int k = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    Eigen::MatrixXd& w = grads.weights[l];
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        w(r, c) = flat[k++];
      }
    }
    for (int i = 0; i < grads.biases[l].size(); ++i) {
      grads.biases[l][i] = flat[k++];
    }
  }
  return grads;
}

FlatAdam::FlatAdam(int n, AdamConfig cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void FlatAdam::update(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("FlatAdam::update: shape mismatch");
  }
  ++step_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_.array() = cfg_.beta2 * v_.array() + (1.0 - cfg_.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  params.array() -=
      cfg_.alpha * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
}

GaussianPolicy make_policy(int obs_dim, int act_dim, Rng& rng) {
  GaussianPolicy policy;
  // Small output gain keeps initial actions near zero; the -2.5 log-std start
  // gives enough exploration without saturating the command range.
  policy.mean_net = make_mlp(obs_dim, act_dim, OutputActivation::Tanh, rng, 0.01);
  policy.log_std = Eigen::VectorXd::Constant(act_dim, -2.5);
  return policy;
}

Eigen::VectorXd policy_mean(const GaussianPolicy& policy, const Eigen::VectorXd& obs) {
  return forward_one(policy.mean_net, obs);
}

std::pair<Eigen::VectorXd, double> policy_sample(const GaussianPolicy& policy,
                                                 const Eigen::VectorXd& obs,
                                                 Rng& rng) {
  const Eigen::VectorXd mean = policy_mean(policy, obs);
  Eigen::VectorXd action(mean.size());
  for (int i = 0; i < mean.size(); ++i) {
    action[i] = mean[i] + std::exp(policy.log_std[i]) * rng.normal();
  }
  return {action, gaussian_log_prob(mean, policy.log_std, action)};
}

double gaussian_log_prob(const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action) {
  const Eigen::ArrayXd z = (action - mean).array() * (-log_std.array()).exp();
  return -0.5 * (z.square().sum() +
                 static_cast<double>(mean.size()) * kLog2Pi) -
         log_std.sum();
}

Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& means,
                                  const Eigen::VectorXd& log_std,
                                  const Eigen::MatrixXd& actions) {
  if (means.rows() != actions.rows() || means.cols() != actions.cols() ||
      means.cols() != log_std.size()) {
    throw std::invalid_argument("gaussian_log_prob: shape mismatch");
  }
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const double base =
      -log_std.sum() - 0.5 * static_cast<double>(log_std.size()) * kLog2Pi;
  Eigen::VectorXd lp(means.rows());
  for (int i = 0; i < means.rows(); ++i) {
    const Eigen::ArrayXd diff = (actions.row(i) - means.row(i)).transpose().array();
    lp[i] = base - 0.5 * (diff.square() * inv_var).sum();
  }
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() +
         0.5 * static_cast<double>(log_std.size()) * (1.0 + kLog2Pi);
}

int policy_flat_size(const GaussianPolicy& policy) {
  return flat_size(policy.mean_net) + static_cast<int>(policy.log_std.size());
}

Eigen::VectorXd policy_to_flat(const GaussianPolicy& policy) {
  Eigen::VectorXd flat(policy_flat_size(policy));
  flat.head(flat_size(policy.mean_net)) = to_flat(policy.mean_net);
  flat.tail(policy.log_std.size()) = policy.log_std;
  return flat;
}

void policy_from_flat(GaussianPolicy& policy, const Eigen::VectorXd& flat) {
  if (flat.size() != policy_flat_size(policy)) {
    throw std::invalid_argument("policy_from_flat: size mismatch");
  }
  const int net_size = flat_size(policy.mean_net);
  from_flat(policy.mean_net, flat.head(net_size));
  policy.log_std = flat.tail(policy.log_std.size());
}

namespace {

void append_value(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, res.ptr);
}

double parse_value(const std::string& word) {
  double v = 0.0;
  const auto res = std::from_chars(word.data(), word.data() + word.size(), v);
  if (res.ec != std::errc{} || res.ptr != word.data() + word.size()) {
    throw std::runtime_error("checkpoint: bad numeric value '" + word + "'");
  }
  return v;
}

}  // namespace

void write_tensors(std::ostream& out, const TensorMap& tensors) {
  out << "snakenet v1\n";
  std::string line;
  for (const auto& [name, t] : tensors) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (int r = 0; r < t.rows(); ++r) {
      line.clear();
      for (int c = 0; c < t.cols(); ++c) {
        if (c > 0) {
          line += ' ';
        }
        append_value(line, t(r, c));
      }
      line += '\n';
      out << line;
    }
  }
}

TensorMap read_tensors(std::istream& in) {
  std::string tag;
  std::string version;
  in >> tag >> version;
  if (!in || tag != "snakenet" || version != "v1") {
    throw std::runtime_error("checkpoint: bad header");
  }
  TensorMap tensors;
  std::string word;
  while (in >> word) {
    if (word != "tensor") {
      throw std::runtime_error("checkpoint: expected tensor record, got '" + word + "'");
    }
    std::string name;
    long rows = 0;
    long cols = 0;
    if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) {
      throw std::runtime_error("checkpoint: malformed tensor header");
    }
    Eigen::MatrixXd t(rows, cols);
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        if (!(in >> word)) {
          throw std::runtime_error("checkpoint: truncated tensor " + name);
        }
        t(r, c) = parse_value(word);
      }
    }
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

namespace {

TensorMap agent_tensors(const GaussianPolicy& policy, const Mlp& critic) {
  TensorMap tensors;
  const auto add_net = [&tensors](const std::string& prefix, const Mlp& net) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      tensors.emplace_back(prefix + ".w" + std::to_string(l), net.weights[l]);
      tensors.emplace_back(prefix + ".b" + std::to_string(l),
                           Eigen::MatrixXd(net.biases[l]));
    }
  };
  add_net("actor", policy.mean_net);
  tensors.emplace_back("actor.log_std", Eigen::MatrixXd(policy.log_std));
  add_net("critic", critic);
  return tensors;
}

const Eigen::MatrixXd& find_tensor(const TensorMap& tensors, const std::string& name) {
  for (const auto& [key, value] : tensors) {
    if (key == name) {
      return value;
    }
  }
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

void load_net(const TensorMap& tensors, const std::string& prefix, Mlp& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Eigen::MatrixXd& w = find_tensor(tensors, prefix + ".w" + std::to_string(l));
    const Eigen::MatrixXd& b = find_tensor(tensors, prefix + ".b" + std::to_string(l));
    if (w.rows() != net.weights[l].rows() || w.cols() != net.weights[l].cols() ||
        b.rows() != net.biases[l].size() || b.cols() != 1) {
      throw std::runtime_error("checkpoint: tensor shape mismatch for " + prefix);
    }
    net.weights[l] = w;
    net.biases[l] = b.col(0);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const GaussianPolicy& policy,
                     const Mlp& critic) {
  std::ofstream file(path);
  if (!file) {
    throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  }
  write_tensors(file, agent_tensors(policy, critic));
  file.flush();
  if (!file) {
    throw std::runtime_error("checkpoint: write failed for " + path);
  }
}

void load_checkpoint(const std::string& path, GaussianPolicy& policy, Mlp& critic) {
  std::ifstream file(path);
  if (!file) {
    throw std::runtime_error("checkpoint: cannot open " + path);
  }
  const TensorMap tensors = read_tensors(file);
  load_net(tensors, "actor", policy.mean_net);
  const Eigen::MatrixXd& ls = find_tensor(tensors, "actor.log_std");
  if (ls.rows() != policy.log_std.size() || ls.cols() != 1) {
    throw std::runtime_error("checkpoint: log_std shape mismatch");
  }
  policy.log_std = ls.col(0);
  load_net(tensors, "critic", critic);
}

}  // namespace snake
