#include "synctl/linkworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace synctl {

MorphologyGraph morphology_from_links(const std::string& robot_id,
                                      const std::vector<LinkSpec>& links,
                                      int state_dim) {
  MorphologyGraph g;
  g.robot_id = robot_id;
  g.state_dim = state_dim;
  for (const auto& l : links) g.parent.push_back(l.parent);
  g.validate();
  return g;
}

LinkWorld::LinkWorld(std::string robot_id, std::vector<LinkSpec> links,
                     int base_state_dim, EnvParams params)
    : robot_id_(std::move(robot_id)), links_(std::move(links)), params_(params) {
  require(!links_.empty(), "InvalidMorphology", "no links");
  for (const auto& l : links_) {
    require(l.length > 0 && l.mass > 0, "InvalidMorphology",
            "link length and mass must be positive");
    require(l.joint_limit > 0 && l.joint_limit <= M_PI, "InvalidMorphology",
            "joint limit must be in (0, pi]");
  }
  morphology_ = morphology_from_links(robot_id_, links_, base_state_dim);

  total_mass_ = 0.0;
  for (const auto& l : links_) total_mass_ += l.mass;
  rest_reach_.assign(links_.size(), 0.0);
  total_reach_ = 0.0;
  for (std::size_t k = 0; k < links_.size(); ++k) {
    double reach = 0.0;
    int cur = static_cast<int>(k);
    while (cur != kRootSentinel) {
      reach += links_[static_cast<std::size_t>(cur)].length;
      cur = links_[static_cast<std::size_t>(cur)].parent;
    }
    rest_reach_[k] = reach;
    total_reach_ = std::max(total_reach_, reach);
  }
  state_ = rest_state();
}

EnvState LinkWorld::rest_state() const {
  EnvState s;
  s.q.assign(links_.size(), 0.0);
  s.qd.assign(links_.size(), 0.0);
  return s;
}

void LinkWorld::reset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "reset/" + robot_id_));
  state_ = rest_state();
  for (std::size_t k = 0; k < links_.size(); ++k)
    state_.q[k] = rng.uniform(-params_.reset_jitter, params_.reset_jitter);
}

void LinkWorld::forward_kinematics(const EnvState& s, std::vector<double>& tip_x,
                                   std::vector<double>& tip_y,
                                   std::vector<double>& abs_angle,
                                   std::vector<double>& abs_rate) const {
  const int k = num_actuators();
  tip_x.assign(static_cast<std::size_t>(k), 0.0);
  tip_y.assign(static_cast<std::size_t>(k), 0.0);
  abs_angle.assign(static_cast<std::size_t>(k), 0.0);
  abs_rate.assign(static_cast<std::size_t>(k), 0.0);
  // parents always precede children is NOT guaranteed; walk via recursion

  // iterative topological pass: parent[k] < k holds for all shipped fixtures,
  // but resolve generally by repeated sweeps
  std::vector<bool> done(static_cast<std::size_t>(k), false);
  int remaining = k;
  while (remaining > 0) {
    int progressed = 0;
    for (int i = 0; i < k; ++i) {
      if (done[static_cast<std::size_t>(i)]) continue;
      const int p = links_[static_cast<std::size_t>(i)].parent;
      if (p != kRootSentinel && !done[static_cast<std::size_t>(p)]) continue;
      const double base_angle = p == kRootSentinel ? 0.0 : abs_angle[static_cast<std::size_t>(p)];
      const double base_rate = p == kRootSentinel ? 0.0 : abs_rate[static_cast<std::size_t>(p)];
      const double base_x = p == kRootSentinel ? 0.0 : tip_x[static_cast<std::size_t>(p)];
      const double base_y = p == kRootSentinel ? 0.0 : tip_y[static_cast<std::size_t>(p)];
      abs_angle[static_cast<std::size_t>(i)] = base_angle + s.q[static_cast<std::size_t>(i)];
      abs_rate[static_cast<std::size_t>(i)] = base_rate + s.qd[static_cast<std::size_t>(i)];
      tip_x[static_cast<std::size_t>(i)] =
          base_x + links_[static_cast<std::size_t>(i)].length *
                       std::cos(abs_angle[static_cast<std::size_t>(i)]);
      tip_y[static_cast<std::size_t>(i)] =
          base_y + links_[static_cast<std::size_t>(i)].length *
                       std::sin(abs_angle[static_cast<std::size_t>(i)]);
      done[static_cast<std::size_t>(i)] = true;
      ++progressed;
      --remaining;
    }
    require(progressed > 0, "InvalidMorphology", "parent cycle in link table");
  }
}

double LinkWorld::mean_elevation(const EnvState& s) const {
  std::vector<double> tx, ty, aa, ar;
  forward_kinematics(s, tx, ty, aa, ar);
  double sum = 0.0;
  for (double y : ty) sum += params_.rest_height + y;
  return sum / static_cast<double>(ty.size());
}

StepResult LinkWorld::step(const Tensor& actions) {
  const int k = num_actuators();
  require(actions.rows() == k && actions.cols() == 1, "ShapeMismatch",
          "actions must be Kx1");
  for (int i = 0; i < k; ++i)
    require(std::isfinite(actions.at(i, 0)), "NonFiniteAction",
            "action " + std::to_string(i));

  // anisotropic ground friction, evaluated on the pre-step state: horizontal
  // tip velocities from joint motion alone; backward motion grips, forward
  // motion slips
  std::vector<double> tx, ty, aa, ar;
  forward_kinematics(state_, tx, ty, aa, ar);
  std::vector<double> tip_vx(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    // d tip_x(i) / dt accumulates along the chain: parent tip velocity plus
    // this link's own rotation
    const int p = links_[static_cast<std::size_t>(i)].parent;
    const double parent_v = p == kRootSentinel ? 0.0 : tip_vx[static_cast<std::size_t>(p)];
    tip_vx[static_cast<std::size_t>(i)] =
        parent_v - links_[static_cast<std::size_t>(i)].length *
                       std::sin(aa[static_cast<std::size_t>(i)]) *
                       ar[static_cast<std::size_t>(i)];
  }
  double thrust = 0.0;
  for (int i = 0; i < k; ++i) {
    const double u = tip_vx[static_cast<std::size_t>(i)];
    // traction fades as a tip sinks below its rest elevation; a collapsing
    // body cannot keep pushing the ground
    const double elevation = params_.rest_height + ty[static_cast<std::size_t>(i)];
    const double contact = std::clamp(elevation / params_.rest_height, 0.0, 1.0);
    thrust += contact * (params_.grip_gain * std::max(0.0, -u) -
                         params_.slip_gain * std::max(0.0, u));
  }

  const double commanded =
      params_.thrust_gain * thrust / std::sqrt(static_cast<double>(k));
  state_.root_vx = (1.0 - params_.ground_response) * state_.root_vx +
                   params_.ground_response * commanded;
  state_.root_x += params_.dt * state_.root_vx;

  // accumulated as explicit statements so the value is reproducible across
  // call sites regardless of fp contraction
  double action_sq = 0.0;
  for (int i = 0; i < k; ++i) {
    const double a = std::clamp(actions.at(i, 0), -1.0, 1.0);
    const double sq = a * a;
    action_sq += sq;
  }

  // joint dynamics: semi-implicit Euler substeps of a damped driven hinge
  const double h = params_.dt / params_.substeps;
  for (int sub = 0; sub < params_.substeps; ++sub) {
    for (int i = 0; i < k; ++i) {
      const double a = std::clamp(actions.at(i, 0), -1.0, 1.0);
      const double torque = params_.torque_max * a -
                            params_.joint_damping * state_.qd[static_cast<std::size_t>(i)] -
                            params_.joint_stiffness * state_.q[static_cast<std::size_t>(i)];
      state_.qd[static_cast<std::size_t>(i)] += h * torque / params_.inertia;
      state_.q[static_cast<std::size_t>(i)] += h * state_.qd[static_cast<std::size_t>(i)];
      const double lim = links_[static_cast<std::size_t>(i)].joint_limit;
      if (state_.q[static_cast<std::size_t>(i)] > lim) {
        state_.q[static_cast<std::size_t>(i)] = lim;
        state_.qd[static_cast<std::size_t>(i)] = 0.0;
      } else if (state_.q[static_cast<std::size_t>(i)] < -lim) {
        state_.q[static_cast<std::size_t>(i)] = -lim;
        state_.qd[static_cast<std::size_t>(i)] = 0.0;
      }
    }
  }
  state_.t += 1;

  for (double v : state_.q)
    require(std::isfinite(v), "EnvDiverged", "joint angle diverged");
  for (double v : state_.qd)
    require(std::isfinite(v), "EnvDiverged", "joint velocity diverged");
  require(std::isfinite(state_.root_vx) && std::isfinite(state_.root_x), "EnvDiverged",
          "root state diverged");

  StepResult res;
  res.forward_velocity = state_.root_vx;
  res.mean_elevation = mean_elevation(state_);
  res.action_penalty = params_.action_cost * action_sq;
  res.reward = res.forward_velocity - res.action_penalty;
  res.done = res.mean_elevation < params_.fall_fraction * params_.rest_height ||
             state_.t >= params_.horizon;
  return res;
}

Tensor LinkWorld::observe() const {
  const int k = num_actuators();
  Tensor obs(k, kBaseStateDim);
  const double phase = 2.0 * M_PI * static_cast<double>(state_.t % params_.phase_period) /
                       static_cast<double>(params_.phase_period);
  for (int i = 0; i < k; ++i) {
    const double q = state_.q[static_cast<std::size_t>(i)];
    obs.at(i, 0) = q;
    obs.at(i, 1) = state_.qd[static_cast<std::size_t>(i)];
    obs.at(i, 2) = std::sin(q);
    obs.at(i, 3) = std::cos(q);
    obs.at(i, 4) = links_[static_cast<std::size_t>(i)].length;
    obs.at(i, 5) = rest_reach_[static_cast<std::size_t>(i)] / total_reach_;
    obs.at(i, 6) = state_.root_vx;
    obs.at(i, 7) = std::sin(phase);
    obs.at(i, 8) = std::cos(phase);
  }
  return obs;
}

std::vector<LinkSpec> apply_removal(const std::vector<LinkSpec>& base,
                                    const std::vector<int>& removal) {
  const int k = static_cast<int>(base.size());
  std::set<int> removed;
  for (int r : removal) {
    require(0 <= r && r < k, "DisconnectedVariant",
            "removal index " + std::to_string(r) + " out of range");
    removed.insert(r);
  }
  // removals must be closed under descendants, or children would dangle
  for (int i = 0; i < k; ++i) {
    const int p = base[static_cast<std::size_t>(i)].parent;
    if (p != kRootSentinel && removed.count(p) && !removed.count(i))
      raise("DisconnectedVariant", "removing actuator " + std::to_string(p) +
                                       " strands child " + std::to_string(i));
  }
  require(removed.size() < base.size(), "DisconnectedVariant",
          "removal leaves no actuators");

  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  std::vector<LinkSpec> out;
  for (int i = 0; i < k; ++i) {
    if (removed.count(i)) continue;
    remap[static_cast<std::size_t>(i)] = static_cast<int>(out.size());
    out.push_back(base[static_cast<std::size_t>(i)]);
  }
  for (auto& l : out)
    if (l.parent != kRootSentinel) l.parent = remap[static_cast<std::size_t>(l.parent)];
  return out;
}

const Variant& VariantFamily::variant(const std::string& id) const {
  for (const auto& v : variants)
    if (v.id == id) return v;
  raise("ConfigInvalid", "unknown variant " + id + " in family " + name);
}

int VariantFamily::max_actuators() const {
  int p = 0;
  for (const auto& v : variants) p = std::max(p, v.morphology.num_actuators());
  return p;
}

VariantFamily family_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  require(!j.is_discarded(), "ConfigInvalid", "malformed family JSON");
  for (const char* key : {"family", "links", "variants", "train"})
    require(j.contains(key), "ConfigInvalid", std::string("family JSON needs ") + key);

  VariantFamily fam;
  fam.name = j.at("family").get<std::string>();
  fam.state_dim = j.value("state_dim", int{LinkWorld::kBaseStateDim});
  require(fam.state_dim == LinkWorld::kBaseStateDim, "ConfigInvalid",
          "state_dim must be " + std::to_string(LinkWorld::kBaseStateDim));

  std::vector<LinkSpec> base;
  for (const auto& l : j.at("links")) {
    LinkSpec spec;
    spec.length = l.value("length", 0.4);
    spec.mass = l.value("mass", 1.0);
    spec.joint_limit = l.value("limit", 2.0);
    spec.parent = l.at("parent").get<int>();
    base.push_back(spec);
  }

  for (const auto& v : j.at("variants")) {
    Variant var;
    var.id = v.at("id").get<std::string>();
    var.links = apply_removal(base, v.value("remove", std::vector<int>{}));
    var.morphology = morphology_from_links(var.id, var.links, fam.state_dim);
    // clustering needs pairwise distances, so the actuator graph must be
    // connected on its own
    (void)shortest_distances(build_adjacency(var.morphology));
    fam.variants.push_back(std::move(var));
  }

  fam.train_ids = j.at("train").get<std::vector<std::string>>();
  fam.test_ids = j.value("test", std::vector<std::string>{});
  for (const auto& id : fam.train_ids) (void)fam.variant(id);
  for (const auto& id : fam.test_ids) (void)fam.variant(id);
  require(!fam.train_ids.empty(), "ConfigInvalid", "family has no train variants");
  return fam;
}

VariantFamily load_family(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "ConfigInvalid", "cannot open family file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return family_from_json_text(ss.str());
}

LinkWorld make_env(const VariantFamily& family, const std::string& variant_id) {
  const Variant& v = family.variant(variant_id);
  return LinkWorld(v.id, v.links, family.state_dim, family.params);
}

}  // namespace synctl
