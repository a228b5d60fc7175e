#include <doctest.h>

#include <sstream>
#include <vector>

#include "coopcart/rollout.hpp"
#include "coopcart/rng.hpp"

using namespace coopcart;

namespace {

NafNetwork zero_network() {
  NafConfig config;
  Rng rng(1);
  NafNetwork net(config, rng);
  net.set_parameters(Eigen::VectorXd::Zero(net.parameter_count()));
  return net;
}

std::vector<NafNetwork> zero_pair() {
  std::vector<NafNetwork> nets;
  nets.push_back(zero_network());
  nets.push_back(zero_network());
  return nets;
}

std::vector<NafNetwork> random_pair(std::uint64_t seed) {
  NafConfig config;
  std::vector<NafNetwork> nets;
  Rng a(seed), b(seed + 1);
  nets.emplace_back(config, a);
  nets.emplace_back(config, b);
  return nets;
}

int count_rows(const std::string& text) {
  int rows = -1;  // skip the header
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return rows;
}

}  // namespace

TEST_CASE("evaluate_greedy: deterministic summaries") {
  const EnvConfig env;
  const auto nets = random_pair(71);
  const EvalSummary a = evaluate_greedy(env, nets, 20, 5);
  const EvalSummary b = evaluate_greedy(env, nets, 20, 5);
  CHECK(a.mean_length == b.mean_length);
  CHECK(a.mean_returns == b.mean_returns);
  CHECK(a.episodes == 20);

  // Untrained controllers cannot ride out full-length episodes.
  CHECK(a.mean_length < 1000.0);
  CHECK(a.mean_length >= 1.0);

  const EvalSummary c = evaluate_greedy(env, nets, 20, 6);
  CHECK(c.mean_length != a.mean_length);

  SUBCASE("network count must match the agent count") {
    std::vector<NafNetwork> one;
    one.push_back(zero_network());
    CHECK_THROWS_AS((void)evaluate_greedy(env, one, 5, 1), std::invalid_argument);
  }
}

TEST_CASE("export_value_surface: shape, averaging and reproducibility") {
  const auto nets = random_pair(73);
  const NafNetwork& net = nets[0];

  SUBCASE("1x1 grid with no averaging samples hits the exact state") {
    ValueSurfaceSpec spec;
    spec.position_min = spec.position_max = 0.7;
    spec.position_count = 1;
    spec.angle_min = spec.angle_max = -0.05;
    spec.angle_count = 1;
    spec.velocity_count = 0;
    std::ostringstream out;
    export_value_surface(net, spec, out);

    std::istringstream in(out.str());
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "position,angle,value");
    std::getline(in, row);
    const Eigen::Vector4d x{0.7, 0.0, -0.05, 0.0};
    char comma;
    double position, angle, value;
    std::istringstream fields(row);
    fields >> position >> comma >> angle >> comma >> value;
    CHECK(position == 0.7);
    CHECK(angle == -0.05);
    CHECK(value == doctest::Approx(net.value(x)).epsilon(1e-12));
    CHECK(count_rows(out.str()) == 1);
  }
  SUBCASE("row count equals the grid size") {
    ValueSurfaceSpec spec;
    spec.position_count = 5;
    spec.angle_count = 7;
    spec.velocity_count = 2;
    std::ostringstream out;
    export_value_surface(net, spec, out);
    CHECK(count_rows(out.str()) == 35);
  }
  SUBCASE("two-point velocity grid averages the two endpoint values") {
    ValueSurfaceSpec spec;
    spec.position_min = spec.position_max = 0.0;
    spec.position_count = 1;
    spec.angle_min = spec.angle_max = 0.1;
    spec.angle_count = 1;
    spec.velocity_range = 1.0;
    spec.velocity_count = 2;
    std::ostringstream out;
    export_value_surface(net, spec, out);

    double expected = 0.0;
    for (double v : {-1.0, 1.0})
      for (double w : {-1.0, 1.0}) expected += net.value(Eigen::Vector4d{0.0, v, 0.1, w});
    expected /= 4.0;
    std::istringstream in(out.str());
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    const double value = std::stod(row.substr(row.rfind(',') + 1));
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("re-running is byte-identical") {
    ValueSurfaceSpec spec;
    std::ostringstream a, b;
    export_value_surface(net, spec, a);
    export_value_surface(net, spec, b);
    CHECK(a.str() == b.str());
  }
  SUBCASE("empty grid is an error") {
    ValueSurfaceSpec spec;
    spec.position_count = 0;
    std::ostringstream out;
    CHECK_THROWS_AS(export_value_surface(net, spec, out), std::invalid_argument);
  }
}

TEST_CASE("export_trajectory: rollout rows") {
  const EnvConfig env;

  SUBCASE("zero policy from the equilibrium is constant") {
    const auto nets = zero_pair();
    std::ostringstream out;
    export_trajectory(env, nets, CartPoleState{}, 10, out);
    CHECK(count_rows(out.str()) == 10);

    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,position,velocity,angle,angular_velocity,u_1,u_2,r_1,r_2,terminated");
    int step = 0;
    while (std::getline(in, line)) {
      std::string expected = std::to_string(step) + ",0,0,0,0,0,0,1,5,0";
      CHECK(line == expected);
      ++step;
    }
  }
  SUBCASE("terminal initial state produces a single terminated row") {
    const auto nets = zero_pair();
    CartPoleState x;
    x.position = 3.0;
    std::ostringstream out;
    export_trajectory(env, nets, x, 10, out);
    CHECK(count_rows(out.str()) == 1);
    CHECK(out.str().find(",1\n") != std::string::npos);
  }
  SUBCASE("row count never exceeds the requested steps") {
    const auto nets = random_pair(79);
    for (int steps : {0, 1, 5, 200}) {
      std::ostringstream out;
      export_trajectory(env, nets, CartPoleState{}, steps, out);
      CHECK(count_rows(out.str()) <= steps + 1);
    }
  }
  SUBCASE("re-running is byte-identical") {
    const auto nets = random_pair(83);
    CartPoleState x;
    x.position = 1.0;
    x.angle = 0.03;
    std::ostringstream a, b;
    export_trajectory(env, nets, x, 50, a);
    export_trajectory(env, nets, x, 50, b);
    CHECK(a.str() == b.str());
  }
}
