#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"

#include "bxrl/common/errors.hpp"
#include "bxrl/policy/checkpoint.hpp"
#include "bxrl/policy/functional.hpp"

using namespace bxrl;
using namespace bxrl::policy;

namespace {

Observation random_obs(Rng& rng) {
  Observation o{};
  for (int r = 0; r < kObsRows; ++r) {
    o[obs_index(r, 0)] = 1.0;
    for (int c = 1; c < kObsCols; ++c) o[obs_index(r, c)] = rng.uniform(-1.0, 1.0);
  }
  return o;
}

// Parameters with non-trivial policy logits.
PolicyParams lively_params(std::uint64_t seed) {
  InitOptions opt;
  opt.policy_gain = 1.5;
  return PolicyParams::initialize(NetworkShape{}, seed, opt);
}

PolicyParams shifted(const PolicyParams& p, std::size_t i, double h) {
  std::vector<double> v = p.vector();
  v[i] += h;
  return PolicyParams(p.shape(), std::move(v));
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// A random functional mixing every differentiable primitive.
Functional random_functional(Rng& rng, int kind) {
  Functional f;
  const int o1 = f.add_observation(random_obs(rng));
  const int o2 = f.add_observation(random_obs(rng));
  const Action a = static_cast<Action>(rng.uniform_int(kNumActions));
  const Action b = static_cast<Action>(rng.uniform_int(kNumActions));
  Var p = f.prob(o1, a);
  Var q = f.prob(o2, b);
  switch (kind % 5) {
    case 0: f.set_output(0.7 * p - 0.3 * q + 0.1); break;
    case 1: f.set_output(f.log_prob(o1, a) * f.tanh(q) + f.square(f.value(o2))); break;
    case 2: f.set_output(f.exp(p) - f.log(q) + f.huber(p - q, 0.05)); break;
    case 3: f.set_output(f.abs(p - q) + f.max(p, q) * f.min(p, q) + f.relu(p - 0.1)); break;
    default: f.set_output(f.clip(p - q, -0.5, 0.5) + -f.value(o1) * 0.01 + p * q); break;
  }
  return f;
}

}  // namespace

TEST_CASE("network shape") {
  const NetworkShape s;
  CHECK(s.param_count() == 6214);
  NetworkShape bad;
  bad.inputs = 24;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(PolicyParams(s, std::vector<double>(10, 0.0)), ContractError);
  std::vector<double> v(s.param_count(), 0.0);
  v[3] = std::nan("");
  CHECK_THROWS_AS(PolicyParams(s, v), ContractError);
}

TEST_CASE("zero policy head gives a uniform policy") {
  InitOptions opt;
  opt.policy_gain = 0.0;
  const PolicyParams p = PolicyParams::initialize(NetworkShape{}, 3, opt);
  Rng rng(1);
  const PolicyOutput out = forward(p, random_obs(rng));
  for (double pr : out.action_probs) CHECK(pr == 0.2);
}

TEST_CASE("initialisation is seeded and orthogonal") {
  const PolicyParams a = PolicyParams::initialize(NetworkShape{}, 11);
  CHECK(a == PolicyParams::initialize(NetworkShape{}, 11));
  CHECK_FALSE(a == PolicyParams::initialize(NetworkShape{}, 12));
  CHECK(a.id().size() == 16);
  // First layer is 64 x 25 with orthonormal columns scaled by sqrt(2).
  const auto v = a.values();
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) {
      double dot = 0.0;
      for (int r = 0; r < 64; ++r) dot += v[static_cast<std::size_t>(r * 25 + i)] * v[static_cast<std::size_t>(r * 25 + j)];
      CHECK(dot == doctest::Approx(i == j ? 2.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("forward outputs are normalised and pure") {
  const PolicyParams p = lively_params(5);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Observation o = random_obs(rng);
    const PolicyOutput a = forward(p, o);
    const PolicyOutput b = forward(p, o);
    CHECK(a.action_probs == b.action_probs);
    const double sum = std::accumulate(a.action_probs.begin(), a.action_probs.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (int k = 0; k < kNumActions; ++k) {
      CHECK(a.action_probs[k] >= 0.0);
      CHECK(std::abs(a.log_probs[k] - std::log(a.action_probs[k])) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(forward(p, std::vector<double>(24, 0.0)), ContractError);
}

TEST_CASE("forward golden value") {
  const PolicyParams p = lively_params(123);
  Observation o{};
  for (int i = 0; i < kObsSize; ++i) o[static_cast<std::size_t>(i)] = std::sin(0.37 * i);
  const PolicyOutput out = forward(p, o);
  // Recorded once from this implementation's float64 path.
  const std::array<double, kNumActions> golden = {0x1.c3c4e21b89564p-3, 0x1.61e7e0be0f036p-2,
                                                  0x1.955a8177041dep-3, 0x1.2b1a699b1939p-3,
                                                  0x1.6fece2ac7697bp-4};
  for (int k = 0; k < kNumActions; ++k)
    CHECK(out.action_probs[k] == doctest::Approx(golden[k]).epsilon(1e-12));
}

TEST_CASE("softmax translation invariance") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    std::array<double, kNumActions> z{};
    for (double& v : z) v = rng.uniform(-5, 5);
    auto shifted_z = z;
    const double c = rng.uniform(-100, 100);
    for (double& v : shifted_z) v += c;
    const auto p = softmax(z);
    const auto q = softmax(shifted_z);
    for (int k = 0; k < kNumActions; ++k) CHECK(std::abs(p[k] - q[k]) <= 1e-12);
  }
}

TEST_CASE("softmax derivative identity") {
  PolicyOutput out;
  out.action_probs = {0.1, 0.2, 0.3, 0.15, 0.25};
  std::array<double, kNumActions> dp{};
  std::array<double, kNumActions> dlp{};
  dp[2] = 1.0;
  const auto dz = logits_adjoint(out, dp, dlp);
  CHECK(dz[2] == doctest::Approx(0.3 * 0.7).epsilon(1e-15));
  CHECK(dz[0] == doctest::Approx(-0.3 * 0.1).epsilon(1e-15));
}

TEST_CASE("constant functional has zero gradient") {
  const PolicyParams p = lively_params(1);
  Functional f;
  Rng rng(2);
  f.add_observation(random_obs(rng));
  f.set_output(f.constant(0.75));
  const GradVector g = grad_scalar(p, f);
  CHECK(g.size() == p.size());
  for (double v : g) CHECK(v == 0.0);
  CHECK(f.evaluate(p) == 0.75);
}

TEST_CASE("single probability matches central differences") {
  const PolicyParams p = lively_params(77);
  Rng rng(78);
  Functional f;
  f.set_output(f.prob(f.add_observation(random_obs(rng)), Action::Right));
  const GradVector g = grad_scalar(p, f);
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(p.size())));
    const double fd = (f.evaluate(shifted(p, i, h)) - f.evaluate(shifted(p, i, -h))) / (2 * h);
    CHECK(rel_error(g[i], fd) < 1e-6);
  }
}

TEST_CASE("random functionals match central differences") {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PolicyParams p = lively_params(1000 + static_cast<std::uint64_t>(trial));
    const Functional f = random_functional(rng, trial);
    const GradVector g = grad_scalar(p, f);
    const double h = 1e-5;
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(p.size())));
      const double fd = (f.evaluate(shifted(p, i, h)) - f.evaluate(shifted(p, i, -h))) / (2 * h);
      worst = std::max(worst, rel_error(g[i], fd));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("tape rules") {
  Functional f;
  Functional other;
  Var a = f.constant(1.0);
  Var b = other.constant(2.0);
  CHECK_THROWS_AS(f.binary(Op::Add, a, b), ContractError);
  CHECK_THROWS_AS(f.prob(0, Action::Left), ContractError);
  CHECK_THROWS_AS(f.unary(Op::Add, a), UnsupportedOpError);
  CHECK_THROWS_AS(parse_op("softplus"), UnsupportedOpError);
  CHECK(parse_op("huber") == Op::Huber);

  const PolicyParams p = lively_params(8);
  Functional g;
  Rng rng(5);
  const int o = g.add_observation(random_obs(rng));
  g.set_output(g.unary(Op::Floor, g.prob(o, Action::Left) * 10.0));
  CHECK(g.evaluate(p) == std::floor(forward(p, g.observations()[0]).prob(Action::Left) * 10.0));
  CHECK_THROWS_AS(grad_scalar(p, g), UnsupportedOpError);

  // A non-differentiable node off the output path is harmless.
  Functional h;
  const int o2 = h.add_observation(random_obs(rng));
  Var pr = h.prob(o2, Action::Idle);
  h.unary(Op::Sign, pr);
  h.set_output(pr);
  CHECK_NOTHROW(grad_scalar(p, h));
}

TEST_CASE("subgradient conventions") {
  std::vector<PolicyOutput> outs(1);
  outs[0].action_probs = {0.2, 0.2, 0.2, 0.2, 0.2};
  Functional f;
  Rng rng(1);
  const int o = f.add_observation(random_obs(rng));
  Var p = f.prob(o, Action::Left);
  f.set_output(f.abs(p - 0.2) + f.clip(p, 0.2, 0.5));
  Functional::Adjoints adj;
  CHECK(f.backprop_outputs(outs, adj) == doctest::Approx(0.2));
  CHECK(adj.dprobs[0][0] == 1.0);
}

TEST_CASE("sampling") {
  Rng rng(10);
  const std::array<double, kNumActions> point = {1, 0, 0, 0, 0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_action(point, rng) == Action::Left);

  const std::array<double, kNumActions> uniform = {0.2, 0.2, 0.2, 0.2, 0.2};
  std::array<int, kNumActions> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_action(uniform, rng))];
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  for (int c : counts) CHECK(std::abs(c - n * 0.2) <= 3 * sigma);

  Rng r1(99), r2(99);
  const PolicyParams p = lively_params(3);
  const Observation o = random_obs(rng);
  const Sample s1 = sample(p, o, r1);
  const Sample s2 = sample(p, o, r2);
  CHECK(s1.action == s2.action);
  CHECK(s1.log_prob == s2.log_prob);
}

TEST_CASE("kl and entropy") {
  PolicyOutput u;
  u.action_probs = {0.2, 0.2, 0.2, 0.2, 0.2};
  for (double& l : u.log_probs) l = std::log(0.2);
  CHECK(entropy(u) == doctest::Approx(std::log(5.0)));
  CHECK(categorical_kl(u.action_probs, u.log_probs, u.log_probs) == 0.0);
  std::array<double, kNumActions> lq{};
  for (int k = 0; k < kNumActions; ++k) lq[k] = std::log(k == 0 ? 0.6 : 0.1);
  CHECK(categorical_kl(u.action_probs, u.log_probs, lq) > 0.0);
}

TEST_CASE("checkpoint round trip") {
  const PolicyParams p = lively_params(21);
  const auto dir = std::filesystem::temp_directory_path() / "bxrl_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.ckpt";
  save_checkpoint(path, p, {21, 4096, 2});
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params == p);
  CHECK(ck.meta == CheckpointMeta{21, 4096, 2});
  CHECK(ck.params.id() == p.id());
  const json side = read_json_file(sidecar_path(path));
  CHECK(side.at("id").get<std::string>() == p.id());

  auto bytes = encode_checkpoint(p, {});
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  bytes = encode_checkpoint(p, {});
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), LookupError);
}
