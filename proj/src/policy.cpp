#include "synctl/policy.hpp"

#include <cmath>

namespace synctl {

Mode parse_mode(const std::string& name) {
  if (name == "solar") return Mode::kSolar;
  if (name == "mask_only") return Mode::kMaskOnly;
  if (name == "no_preference") return Mode::kNoPreference;
  if (name == "monolithic") return Mode::kMonolithic;
  raise("ConfigInvalid", "unknown mode '" + name + "'");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kSolar: return "solar";
    case Mode::kMaskOnly: return "mask_only";
    case Mode::kNoPreference: return "no_preference";
    case Mode::kMonolithic: return "monolithic";
  }
  return "?";
}

nlohmann::json NetConfig::to_json() const {
  return {{"d_model", d_model},
          {"heads", heads},
          {"ffn_hidden", ffn_hidden},
          {"embed_size", embed_size},
          {"relation_hidden", relation_hidden},
          {"relation_out", relation_out},
          {"intra_layers", intra_layers},
          {"inter_layers", inter_layers},
          {"critic_head_hidden", critic_head_hidden},
          {"mlp_hidden", mlp_hidden}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.embed_size = j.value("embed_size", c.embed_size);
  c.relation_hidden = j.value("relation_hidden", c.relation_hidden);
  c.relation_out = j.value("relation_out", c.relation_out);
  c.intra_layers = j.value("intra_layers", c.intra_layers);
  c.inter_layers = j.value("inter_layers", c.inter_layers);
  c.critic_head_hidden = j.value("critic_head_hidden", c.critic_head_hidden);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  require(c.d_model % c.heads == 0, "ConfigInvalid", "d_model must divide by heads");
  return c;
}

RobotSpec robot_spec(const MorphologyGraph& g) {
  RobotSpec spec;
  spec.robot_id = g.robot_id;
  spec.num_actuators = g.num_actuators();
  spec.triples = traversal_triples(g);
  return spec;
}

namespace {

Tensor xavier(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor uniform_init(int rows, int cols, double limit, Rng& rng) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

void add_linear(ParameterSet& ps, const std::string& prefix, int in, int out, Rng& rng) {
  ps.add(prefix + "/W", xavier(in, out, rng));
  ps.add(prefix + "/b", Tensor(1, out));
}

// small final layers keep initial actions and Q values near zero
void add_linear_small(ParameterSet& ps, const std::string& prefix, int in, int out,
                      Rng& rng) {
  ps.add(prefix + "/W", uniform_init(in, out, 3e-3, rng));
  ps.add(prefix + "/b", Tensor(1, out));
}

void add_attention_block(ParameterSet& ps, const std::string& prefix, const NetConfig& cfg,
                         Rng& rng) {
  const int d = cfg.d_model;
  ps.add(prefix + "/ln1/g", Tensor::full(1, d, 1.0));
  ps.add(prefix + "/ln1/b", Tensor(1, d));
  add_linear(ps, prefix + "/q", d, d, rng);
  add_linear(ps, prefix + "/k", d, d, rng);
  add_linear(ps, prefix + "/v", d, d, rng);
  add_linear(ps, prefix + "/o", d, d, rng);
  ps.add(prefix + "/ln2/g", Tensor::full(1, d, 1.0));
  ps.add(prefix + "/ln2/b", Tensor(1, d));
  add_linear(ps, prefix + "/ffn1", d, cfg.ffn_hidden, rng);
  add_linear(ps, prefix + "/ffn2", cfg.ffn_hidden, d, rng);
}

Var linear(Graph& g, const ParameterSet& ps, const std::string& prefix, Var x) {
  return g.add_row(g.matmul(x, g.param(ps, prefix + "/W")), g.param(ps, prefix + "/b"));
}

// pre-norm block: x + MHA(LN(x)), then x + FFN(LN(x))
Var attention_block(Graph& g, const ParameterSet& ps, const std::string& prefix,
                    const NetConfig& cfg, Var x, std::shared_ptr<const BoolMat> mask,
                    int batch, int tokens) {
  Var n1 = g.layer_norm_rows(x, g.param(ps, prefix + "/ln1/g"),
                             g.param(ps, prefix + "/ln1/b"));
  Var att = g.attention_core(linear(g, ps, prefix + "/q", n1),
                             linear(g, ps, prefix + "/k", n1),
                             linear(g, ps, prefix + "/v", n1), std::move(mask), batch,
                             tokens, cfg.heads);
  x = g.add(x, linear(g, ps, prefix + "/o", att));
  Var n2 = g.layer_norm_rows(x, g.param(ps, prefix + "/ln2/g"),
                             g.param(ps, prefix + "/ln2/b"));
  Var f = linear(g, ps, prefix + "/ffn2", g.relu(linear(g, ps, prefix + "/ffn1", n2)));
  return g.add(x, f);
}

void add_relation_net(ParameterSet& ps, const NetConfig& cfg, int pool_size, Rng& rng) {
  ps.add("embed/pool", uniform_init(pool_size, cfg.embed_size, 1.0, rng));
  add_linear(ps, "rel1", cfg.embed_size, cfg.relation_hidden, rng);
  // small output layer keeps H entries and therefore T well-scaled at init
  ps.add("rel2/W", uniform_init(cfg.relation_hidden, cfg.relation_out, 3e-2, rng));
  ps.add("rel2/b", Tensor(1, cfg.relation_out));
}

void check_structure(const SynergyStructure& structure, int k) {
  require(structure.num_actuators() == k, "DimensionMismatch",
          "structure covers " + std::to_string(structure.num_actuators()) +
              " actuators, states cover " + std::to_string(k));
  require(structure.mask.n == k, "StaleStructure", "mask size != K");
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const bool same = structure.assignment[static_cast<std::size_t>(i)] ==
                        structure.assignment[static_cast<std::size_t>(j)];
      require(structure.mask.at(i, j) == same, "StaleStructure",
              "mask inconsistent with assignment");
    }
}

// trunk shared by the synergy-aware actor and critic: encode, masked
// intra-synergy attention, per-synergy mean pooling, inter-synergy attention
struct TrunkOut {
  Var prepool;  // (B*K) x d
  Var pooled;   // (B*L) x d
};

TrunkOut solar_trunk(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                     const std::string& prefix, Var states, int batch,
                     const SynergyStructure& structure) {
  const int k = structure.num_actuators();
  const int L = structure.num_synergies;
  Var h = linear(g, ps, prefix + "enc", states);
  auto mask = std::make_shared<BoolMat>(structure.mask);
  for (int i = 0; i < cfg.intra_layers; ++i)
    h = attention_block(g, ps, prefix + "intra" + std::to_string(i), cfg, h, mask, batch, k);
  TrunkOut out;
  out.prepool = h;
  Var pooled = g.group_mean_pool(h, structure.assignment, L, batch);
  for (int i = 0; i < cfg.inter_layers; ++i)
    pooled = attention_block(g, ps, prefix + "inter" + std::to_string(i), cfg, pooled,
                             nullptr, batch, L);
  out.pooled = pooled;
  return out;
}

void add_solar_trunk(ParameterSet& ps, const std::string& prefix, const NetConfig& cfg,
                     int obs_dim, Rng& rng) {
  add_linear(ps, prefix + "enc", obs_dim, cfg.d_model, rng);
  for (int i = 0; i < cfg.intra_layers; ++i)
    add_attention_block(ps, prefix + "intra" + std::to_string(i), cfg, rng);
  for (int i = 0; i < cfg.inter_layers; ++i)
    add_attention_block(ps, prefix + "inter" + std::to_string(i), cfg, rng);
}

}  // namespace

ParameterSet init_solar_actor(const NetConfig& cfg, int obs_dim, int pool_size,
                              std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  ParameterSet ps;
  add_solar_trunk(ps, "", cfg, obs_dim, rng);
  add_linear_small(ps, "head", cfg.d_model, 1, rng);
  add_relation_net(ps, cfg, pool_size, rng);
  return ps;
}

ParameterSet init_solar_critic(const NetConfig& cfg, int obs_dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed) ^ 0x9d5af3u);
  ParameterSet ps;
  for (const std::string twin : {"q1/", "q2/"}) {
    add_solar_trunk(ps, twin, cfg, obs_dim + 1, rng);
    add_linear(ps, twin + "head1", cfg.d_model, cfg.critic_head_hidden, rng);
    add_linear_small(ps, twin + "head2", cfg.critic_head_hidden, 1, rng);
  }
  return ps;
}

Var transformation_from_reps(Graph& g, Var reps, const std::vector<int>& assignment,
                             int num_synergies) {
  // H = rep rep^T is symmetric, so column averaging equals row averaging
  Var h = g.matmul_nt(reps, reps);
  return g.transpose(g.group_mean_pool(h, assignment, num_synergies, 1));
}

Var build_transformation(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                         const std::vector<TraversalTriple>& triples,
                         const std::vector<int>& assignment, int num_synergies) {
  const int pool_size = ps.at("embed/pool").rows();
  std::vector<int> pre, in, post;
  for (const auto& t : triples) {
    require(t.pre < pool_size && t.in < pool_size && t.post < pool_size,
            "TripleOutOfRange", "traversal rank exceeds embedding pool");
    pre.push_back(t.pre);
    in.push_back(t.in);
    post.push_back(t.post);
  }
  Var pool = g.param(ps, "embed/pool");
  auto relation = [&](std::vector<int> idx) {
    Var e = g.gather_rows(pool, std::move(idx));
    return linear(g, ps, "rel2", g.tanh_(linear(g, ps, "rel1", e)));
  };
  Var reps = g.concat_cols(relation(pre), g.concat_cols(relation(in), relation(post)));
  return transformation_from_reps(g, reps, assignment, num_synergies);
}

SolarActorFwd solar_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                                  Var states, int batch, const SynergyStructure& structure,
                                  const RobotSpec& robot) {
  const int k = robot.num_actuators;
  check_structure(structure, k);
  require(g.value(states).rows() == batch * k, "DimensionMismatch",
          "states rows != batch * K");
  require(static_cast<int>(robot.triples.size()) == k, "DimensionMismatch",
          "triples do not match actuator count");
  const int L = structure.num_synergies;

  TrunkOut trunk = solar_trunk(g, cfg, ps, "", states, batch, structure);
  SolarActorFwd out;
  out.prepool = trunk.prepool;
  out.synergy_actions = g.tanh_(linear(g, ps, "head", trunk.pooled));  // (B*L)x1
  out.t_matrix =
      build_transformation(g, cfg, ps, robot.triples, structure.assignment, L);
  // per-sample action vectors stay inside [-1,1]^K on the ray of T a^s
  Var stacked = g.matmul(out.t_matrix, g.rows_to_cols(out.synergy_actions, batch, L));
  out.actions = g.cols_to_rows(g.bound_rescale_cols(stacked), batch, k);
  return out;
}

namespace {

Var critic_head_from_pooled(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                            const std::string& twin, Var pooled, int batch, int tokens) {
  // mean over the remaining tokens, then the fully-connected head
  Var mean = g.group_mean_pool(pooled, std::vector<int>(static_cast<std::size_t>(tokens), 0),
                               1, batch);
  Var h = g.relu(linear(g, ps, twin + "head1", mean));
  return linear(g, ps, twin + "head2", h);  // B x 1
}

}  // namespace

Var solar_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var states,
                      Var actions, int batch, const SynergyStructure& structure, int twin) {
  const int k = structure.num_actuators();
  check_structure(structure, k);
  require(g.value(actions).rows() == g.value(states).rows() &&
              g.value(actions).cols() == 1,
          "DimensionMismatch", "actions must be (B*K)x1");
  const std::string prefix = twin == 0 ? "q1/" : "q2/";
  Var input = g.concat_cols(states, actions);
  TrunkOut trunk = solar_trunk(g, cfg, ps, prefix, input, batch, structure);
  return critic_head_from_pooled(g, cfg, ps, prefix, trunk.pooled, batch,
                                 structure.num_synergies);
}

std::pair<Var, Var> solar_critic_forward(Graph& g, const NetConfig& cfg,
                                         const ParameterSet& ps, Var states, Var actions,
                                         int batch, const SynergyStructure& structure) {
  return {solar_critic_head(g, cfg, ps, states, actions, batch, structure, 0),
          solar_critic_head(g, cfg, ps, states, actions, batch, structure, 1)};
}

// ---------------------------------------------------------------------------
// mask-only ablation
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaskedLayers = 3;

void add_masked_trunk(ParameterSet& ps, const std::string& prefix, const NetConfig& cfg,
                      int obs_dim, Rng& rng) {
  add_linear(ps, prefix + "enc", obs_dim, cfg.d_model, rng);
  for (int i = 0; i < kMaskedLayers; ++i)
    add_attention_block(ps, prefix + "layer" + std::to_string(i), cfg, rng);
}

Var masked_trunk(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                 const std::string& prefix, Var states, int batch,
                 const SynergyStructure& structure) {
  const int k = structure.num_actuators();
  Var h = linear(g, ps, prefix + "enc", states);
  // synergy mask gates the first layer only
  auto mask = std::make_shared<BoolMat>(structure.mask);
  for (int i = 0; i < kMaskedLayers; ++i)
    h = attention_block(g, ps, prefix + "layer" + std::to_string(i), cfg, h,
                        i == 0 ? mask : nullptr, batch, k);
  return h;
}

}  // namespace

ParameterSet init_masked_actor(const NetConfig& cfg, int obs_dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed) ^ 0x51u);
  ParameterSet ps;
  add_masked_trunk(ps, "", cfg, obs_dim, rng);
  add_linear_small(ps, "head", cfg.d_model, 1, rng);
  return ps;
}

ParameterSet init_masked_critic(const NetConfig& cfg, int obs_dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed) ^ 0x52u);
  ParameterSet ps;
  for (const std::string twin : {"q1/", "q2/"}) {
    add_masked_trunk(ps, twin, cfg, obs_dim + 1, rng);
    add_linear(ps, twin + "head1", cfg.d_model, cfg.critic_head_hidden, rng);
    add_linear_small(ps, twin + "head2", cfg.critic_head_hidden, 1, rng);
  }
  return ps;
}

Var masked_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                         Var states, int batch, const SynergyStructure& structure) {
  check_structure(structure, structure.num_actuators());
  Var h = masked_trunk(g, cfg, ps, "", states, batch, structure);
  return g.tanh_(linear(g, ps, "head", h));  // (B*K)x1
}

Var masked_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var states,
                       Var actions, int batch, const SynergyStructure& structure,
                       int twin) {
  const std::string prefix = twin == 0 ? "q1/" : "q2/";
  Var input = g.concat_cols(states, actions);
  Var h = masked_trunk(g, cfg, ps, prefix, input, batch, structure);
  return critic_head_from_pooled(g, cfg, ps, prefix, h, batch,
                                 structure.num_actuators());
}

std::pair<Var, Var> masked_critic_forward(Graph& g, const NetConfig& cfg,
                                          const ParameterSet& ps, Var states, Var actions,
                                          int batch, const SynergyStructure& structure) {
  return {masked_critic_head(g, cfg, ps, states, actions, batch, structure, 0),
          masked_critic_head(g, cfg, ps, states, actions, batch, structure, 1)};
}

// ---------------------------------------------------------------------------
// monolithic baseline
// ---------------------------------------------------------------------------

ParameterSet init_mono_actor(const NetConfig& cfg, int flat_obs_dim, int max_actuators,
                             std::uint64_t seed) {
  Rng rng(mix_seed(seed) ^ 0x61u);
  ParameterSet ps;
  add_linear(ps, "fc1", flat_obs_dim, cfg.mlp_hidden, rng);
  add_linear(ps, "fc2", cfg.mlp_hidden, cfg.mlp_hidden, rng);
  add_linear_small(ps, "head", cfg.mlp_hidden, max_actuators, rng);
  return ps;
}

ParameterSet init_mono_critic(const NetConfig& cfg, int flat_obs_dim, int max_actuators,
                              std::uint64_t seed) {
  Rng rng(mix_seed(seed) ^ 0x62u);
  ParameterSet ps;
  for (const std::string twin : {"q1/", "q2/"}) {
    add_linear(ps, twin + "fc1", flat_obs_dim + max_actuators, cfg.mlp_hidden, rng);
    add_linear(ps, twin + "fc2", cfg.mlp_hidden, cfg.mlp_hidden, rng);
    add_linear_small(ps, twin + "head", cfg.mlp_hidden, 1, rng);
  }
  return ps;
}

Var mono_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                       Var flat_obs) {
  Var h = g.relu(linear(g, ps, "fc1", flat_obs));
  h = g.relu(linear(g, ps, "fc2", h));
  return g.tanh_(linear(g, ps, "head", h));
}

Var mono_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var flat_obs,
                     Var flat_actions, int twin) {
  const std::string prefix = twin == 0 ? "q1/" : "q2/";
  Var input = g.concat_cols(flat_obs, flat_actions);
  Var h = g.relu(linear(g, ps, prefix + "fc1", input));
  h = g.relu(linear(g, ps, prefix + "fc2", h));
  return linear(g, ps, prefix + "head", h);
}

std::pair<Var, Var> mono_critic_forward(Graph& g, const NetConfig& cfg,
                                        const ParameterSet& ps, Var flat_obs,
                                        Var flat_actions) {
  return {mono_critic_head(g, cfg, ps, flat_obs, flat_actions, 0),
          mono_critic_head(g, cfg, ps, flat_obs, flat_actions, 1)};
}

}  // namespace synctl
