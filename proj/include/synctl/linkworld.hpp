#pragma once

#include <optional>
#include <string>
#include <vector>

#include "synctl/morphology.hpp"
#include "synctl/rng.hpp"
#include "synctl/tensor.hpp"

namespace synctl {

// One torque-driven link hanging off its parent (kRootSentinel = torso).
struct LinkSpec {
  double length = 0.4;      // m
  double mass = 1.0;        // kg
  double joint_limit = 2.0; // rad
  int parent = kRootSentinel;
};

struct EnvParams {
  double dt = 0.01;
  int substeps = 4;
  double torque_max = 1.0;
  double inertia = 0.02;
  double joint_damping = 0.2;
  double joint_stiffness = 1.5;
  double ground_response = 0.15;  // first-order response of v_x to commanded speed
  double thrust_gain = 1.5;       // commanded speed per unit sqrt(K)-scaled thrust
  double grip_gain = 1.0;         // thrust per unit backward tip speed
  double slip_gain = 0.3;         // drag per unit forward tip speed
  double action_cost = 0.01;    // c in reward = v_x - c * |a|^2
  double rest_height = 2.0;     // y0: elevation of every link at rest
  double fall_fraction = 0.3;   // done when mean elevation < fall_fraction * y0
  int horizon = 1000;
  int phase_period = 60;        // steps per phase cycle in the observation
  double reset_jitter = 0.05;   // rad, uniform perturbation at reset
};

struct EnvState {
  double root_x = 0.0;
  double root_vx = 0.0;
  std::vector<double> q;   // joint angles
  std::vector<double> qd;  // joint velocities
  int t = 0;
};

struct StepResult {
  double reward = 0.0;  // always forward_velocity - action_penalty
  bool done = false;
  double forward_velocity = 0.0;
  double action_penalty = 0.0;
  double mean_elevation = 0.0;
};

// Planar chain/tree crawler. Joints are independently damped torque-driven
// hinges with a spring to the rest pose; the root translates under an
// anisotropic friction model where backward-moving link tips grip the ground
// harder than forward-moving tips slip, so coordinated strokes produce net
// forward motion. Thrust is computed from the pre-step state once per step.
class LinkWorld {
 public:
  LinkWorld(std::string robot_id, std::vector<LinkSpec> links, int base_state_dim,
            EnvParams params = {});

  int num_actuators() const { return static_cast<int>(links_.size()); }
  const std::string& robot_id() const { return robot_id_; }
  const MorphologyGraph& morphology() const { return morphology_; }
  const EnvParams& params() const { return params_; }
  const EnvState& state() const { return state_; }

  EnvState rest_state() const;
  // Seeded perturbation around the rest pose.
  void reset(std::uint64_t seed);
  void set_state(const EnvState& s) { state_ = s; }

  // Advances one control step. Actions are clamped to [-1,1]; non-finite
  // entries raise NonFiniteAction, non-finite resulting state EnvDiverged.
  StepResult step(const Tensor& actions);

  // Per-actuator observation block, K x base_state_dim. Row k depends only on
  // joint k's own kinematics, static geometry, and global root state:
  //   [q, qd, sin q, cos q, length, rest_reach, v_x, sin phase, cos phase]
  Tensor observe() const;
  static constexpr int kBaseStateDim = 9;

  double mean_elevation(const EnvState& s) const;

 private:
  void forward_kinematics(const EnvState& s, std::vector<double>& tip_x,
                          std::vector<double>& tip_y, std::vector<double>& abs_angle,
                          std::vector<double>& abs_rate) const;

  std::string robot_id_;
  std::vector<LinkSpec> links_;
  MorphologyGraph morphology_;
  EnvParams params_;
  EnvState state_;
  double total_mass_ = 1.0;
  double total_reach_ = 1.0;
  std::vector<double> rest_reach_;  // distance from root at rest pose
};

// A named morphology variant with its link table.
struct Variant {
  std::string id;
  std::vector<LinkSpec> links;
  MorphologyGraph morphology;
};

struct VariantFamily {
  std::string name;
  int state_dim = LinkWorld::kBaseStateDim;
  std::vector<Variant> variants;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  EnvParams params;

  const Variant& variant(const std::string& id) const;
  int max_actuators() const;
};

// Applies removal sets to the base link table. Every removal must take whole
// subtrees (DisconnectedVariant otherwise) and leave K >= 1.
std::vector<LinkSpec> apply_removal(const std::vector<LinkSpec>& base,
                                    const std::vector<int>& removal);

// Family file: {"family": str, "state_dim": int, "links": [...],
//   "variants": [{"id": str, "remove": [ints]}], "train": [ids], "test": [ids]}
VariantFamily load_family(const std::string& path);
VariantFamily family_from_json_text(const std::string& text);

MorphologyGraph morphology_from_links(const std::string& robot_id,
                                      const std::vector<LinkSpec>& links,
                                      int state_dim);

LinkWorld make_env(const VariantFamily& family, const std::string& variant_id);

}  // namespace synctl
