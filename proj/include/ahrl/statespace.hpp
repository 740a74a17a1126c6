#pragma once

// Personality-from-transactions RNN and attractor analysis of its 3-dim
// state space.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ahrl/affinity.hpp"
#include "ahrl/numerics.hpp"

namespace ahrl {

inline constexpr std::size_t kTransactionCategories = 97;
inline constexpr std::size_t kTransactionSteps = 6;
inline constexpr std::size_t kBehaviorSize = 3;

// steps[t] holds the category fractions of year t; each step sums to one.
struct TransactionHistory {
  std::vector<Vector> steps;
};

struct LabeledHistory {
  TransactionHistory history;
  PersonalityVector personality;
  Trait dominant;
};

// Fractions drawn from a Dirichlet whose concentration mixes fixed per-trait
// templates weighted by the profile. Deterministic per seed.
LabeledHistory synth_transactions(const PersonalityVector& profile, std::uint64_t seed);

// Random prototypical profiles: a uniformly chosen dominant trait in
// [0.6, 1.0], the others in [0, 0.35].
PersonalityVector synth_profile(Rng& rng);
std::vector<LabeledHistory> synth_dataset(std::size_t count, std::uint64_t seed);

class PersonalityRnn {
 public:
  PersonalityRnn() = default;
  // A model with explicit weights counts as trained.
  PersonalityRnn(RnnCell core, DenseLayer head, bool trained = true);
  static PersonalityRnn random(Rng& rng, Activation head_activation = Activation::softmax,
                               std::size_t inputs = kTransactionCategories, std::size_t hidden = kBehaviorSize);

  bool trained() const noexcept { return trained_; }
  void mark_trained() noexcept { trained_ = true; }
  const RnnCell& core() const noexcept { return core_; }
  const DenseLayer& head() const noexcept { return head_; }
  std::size_t output_size() const noexcept { return head_.out_size(); }

  std::vector<Vector> states(const std::vector<Vector>& inputs) const;
  Vector output(std::span<const double> state) const { return dense_forward(head_, state); }
  // Output after the whole history.
  Vector predict(const TransactionHistory& history) const;

  ParameterList parameters();

 private:
  RnnCell core_;
  DenseLayer head_;
  bool trained_ = false;
};

struct PersonalityTrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;  // 0 = full batch
  UpdateRule update_rule = UpdateRule::adam;
  std::uint64_t seed = 0;
};

struct PersonalityTrainResult {
  PersonalityRnn model;
  std::vector<double> loss_history;  // full-dataset MSE at the start of each epoch
};

// Regression target: p / sum(p) for a softmax head, p otherwise.
Vector personality_target(const PersonalityRnn& model, const PersonalityVector& p);

// Mean over samples and outputs of (y − target)² at the final step.
double personality_loss(PersonalityRnn& model, const std::vector<LabeledHistory>& data, GradientRecord* grad);

// Regression of the final output onto the personality vector; mini-batches
// are reshuffled every epoch.
PersonalityTrainResult train_personality_rnn(const std::vector<LabeledHistory>& data,
                                             const PersonalityTrainConfig& config);

// Fraction of samples whose argmax output equals the dominant trait.
double dominant_accuracy(const PersonalityRnn& model, const std::vector<LabeledHistory>& data);

struct BehavioralTrajectory {
  std::vector<Vector> states;
  Trait dominant = Trait::openness;  // argmax of the final output
};

BehavioralTrajectory extract_trajectory(const PersonalityRnn& rnn, const TransactionHistory& history);

// Feeds the first step `repeats` times.
BehavioralTrajectory converge_trajectory(const PersonalityRnn& rnn, const TransactionHistory& history,
                                         std::size_t repeats = 100);

enum class AttractorKind { point, line };

struct Attractor {
  Trait trait = Trait::openness;
  AttractorKind kind = AttractorKind::point;
  std::array<double, 3> location{};
  std::array<double, 3> direction{};  // unit vector for lines
};

struct AttractorSet {
  std::vector<Attractor> attractors;  // one per output dimension
  Matrix grid;                        // S, K×3
  Matrix outputs;                     // O, K×P
  Matrix inverse;                     // ω_inv; (P+1)×3 with a leading intercept row, else P×3
  bool intercept = false;
  Vector extremes;                    // diagonal of 𝒟: per-dimension maxima of O

  // Index of the attractor nearest (L2) to `state`.
  std::size_t nearest(std::span<const double> state) const;
};

struct AttractorOptions {
  std::size_t grid_points = 1008;  // 8 corners plus uniform random points
  std::uint64_t seed = 0;
  // Histories converged to measure per-trait scatter for line detection.
  std::vector<TransactionHistory> probes;
  std::size_t repeats = 100;
  double line_ratio = 5.0;
};

// Samples S ⊂ [−1,1]³, O = head(S), fits S ≈ [1, O]·ω_inv (S ≈ O·ω_inv for a
// softmax head, whose rows already sum to one) and maps each extreme output
// max_j·e_j back into the cube.
AttractorSet estimate_attractors(const PersonalityRnn& rnn, const AttractorOptions& options = {});

// Principal spreads (standard deviations along principal axes), descending,
// and the leading axis.
struct Spread {
  std::array<double, 3> spreads{};
  std::array<double, 3> axis{};
};
Spread principal_spread(const std::vector<Vector>& points);

// Header `customer_id,step,h0,h1,h2,dominant_trait`.
void write_trajectory_csv(std::ostream& out, const std::string& customer_id, const BehavioralTrajectory& trajectory,
                          bool header = true);
// Header `trait,kind,x0,y0,z0,dx,dy,dz`; direction fields are empty for points.
void write_attractor_csv(std::ostream& out, const AttractorSet& set);

// JSON model file.
std::string personality_model_to_string(const PersonalityRnn& rnn);
PersonalityRnn personality_model_from_string(const std::string& text);
void save_personality_model(const std::string& path, const PersonalityRnn& rnn);
PersonalityRnn load_personality_model(const std::string& path);

}  // namespace ahrl
