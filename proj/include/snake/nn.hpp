#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "snake/rng.hpp"

namespace snake {

enum class OutputActivation { Tanh, Linear };

// Fully connected net with the fixed 100-50-25 tanh trunk. Weight matrices
// are (fan_out x fan_in); batches are row-major, one sample per row.
struct Mlp {
  static constexpr std::array<int, 3> kHidden{100, 50, 25};

  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  OutputActivation output_activation = OutputActivation::Linear;
  int in_dim = 0;
  int out_dim = 0;
};

// Post-activation values of every layer, kept from forward for backward/JVP.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> post;  // one entry per layer, last = output
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

Mlp make_mlp(int in_dim, int out_dim, OutputActivation act, Rng& rng,
             double out_gain = 1.0);

// x: (batch x in_dim). Returns (batch x out_dim); fills cache when given.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x,
                        ForwardCache* cache = nullptr);
Eigen::VectorXd forward_one(const Mlp& net, const Eigen::VectorXd& x);

// Reverse-mode gradients, summed over the batch rows of `upstream`.
MlpGrads backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& upstream,
                  Eigen::MatrixXd* input_grad = nullptr);

// Directional derivative of the outputs along a parameter perturbation,
// evaluated at the cached activations. Needed for Fisher-vector products.
Eigen::MatrixXd forward_jvp(const Mlp& net, const ForwardCache& cache,
                            const MlpGrads& dir);

MlpGrads zero_grads(const Mlp& net);

// Flat parameter-vector view, layer order W0 b0 W1 b1 ..., weights row-major.
int flat_size(const Mlp& net);
Eigen::VectorXd to_flat(const Mlp& net);
void from_flat(Mlp& net, const Eigen::VectorXd& flat);
Eigen::VectorXd grads_to_flat(const Mlp& net, const MlpGrads& grads);
MlpGrads grads_from_flat(const Mlp& net, const Eigen::VectorXd& flat);

struct AdamConfig {
  double alpha = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a flat parameter vector: descent step with bias correction.
class FlatAdam {
 public:
  FlatAdam() = default;
  explicit FlatAdam(int n, AdamConfig cfg = {});
  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long step_ = 0;
};

// Diagonal Gaussian over actions: state-dependent mean (tanh head),
// state-independent learned log-std.
struct GaussianPolicy {
  Mlp mean_net;
  Eigen::VectorXd log_std;
};

GaussianPolicy make_policy(int obs_dim, int act_dim, Rng& rng);

Eigen::VectorXd policy_mean(const GaussianPolicy& policy, const Eigen::VectorXd& obs);

// Draw a raw (unclipped) action and its exact log density.
std::pair<Eigen::VectorXd, double> policy_sample(const GaussianPolicy& policy,
                                                 const Eigen::VectorXd& obs,
                                                 Rng& rng);

double gaussian_log_prob(const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& action);
// Batched: means (N x d), actions (N x d) -> N log densities.
Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& means,
                                  const Eigen::VectorXd& log_std,
                                  const Eigen::MatrixXd& actions);
double gaussian_entropy(const Eigen::VectorXd& log_std);

// Policy parameters as one flat vector: [mean_net params; log_std].
int policy_flat_size(const GaussianPolicy& policy);
Eigen::VectorXd policy_to_flat(const GaussianPolicy& policy);
void policy_from_flat(GaussianPolicy& policy, const Eigen::VectorXd& flat);

// Text checkpoints: header "snakenet v1", then one named tensor per record,
// full-precision values that round-trip bit-for-bit.
using TensorMap = std::vector<std::pair<std::string, Eigen::MatrixXd>>;
void write_tensors(std::ostream& out, const TensorMap& tensors);
TensorMap read_tensors(std::istream& in);

void save_checkpoint(const std::string& path, const GaussianPolicy& policy,
                     const Mlp& critic);
void load_checkpoint(const std::string& path, GaussianPolicy& policy, Mlp& critic);

}  // namespace snake
