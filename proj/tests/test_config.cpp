#include <catch_amalgamated.hpp>

#include "synthring/config.hpp"

using namespace synthring;
using Catch::Approx;

namespace {

const char* kFig2 = R"(
[topology]
variant = RingWithAux

[main_ring]
length_m = 38.6
group_velocity_m_s = 2.0651e8
roundtrip_power_loss = 0.05

[aux_ring]
length_m = 3.2166666666666667
group_velocity_m_s = 2.0651e8
roundtrip_power_loss = 0.05

[bus_coupler]
amplitude_ratio = 0.1

[aux_coupler]
amplitude_ratio = 0.5

[grid]
span_hz = 64.2e6
points = 20001
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

template <class E>
std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const E& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("the second figure's parameters load and echo N = 12") {
  const auto c = parse_config(kFig2);
  CHECK(c.topology.variant == Variant::RingWithAux);
  CHECK(c.topology.aux_ratio() == 12);
  CHECK(c.drive.input_site == 6);
  REQUIRE(c.grid);
  CHECK(c.grid->span == Approx(kTwoPi * 64.2e6));
  CHECK(c.topology.aux_coupler->amplitude_ratio / c.topology.bus_coupler.amplitude_ratio == Approx(5.0));
  CHECK_FALSE(c.topology.modulation.enabled);
}

TEST_CASE("missing aux ring is reported as 'missing aux_ring'") {
  std::string text = kFig2;
  const auto a = text.find("[aux_ring]");
  const auto b = text.find("[bus_coupler]");
  text.erase(a, b - a);
  try {
    parse_config(text);
    FAIL("no throw");
  } catch (const MissingKeyError& e) {
    CHECK(std::string(e.what()) == "missing aux_ring");
    CHECK(e.key() == "aux_ring");
  }
}

TEST_CASE("non-integer length ratio is rejected") {
  const auto text = replace(kFig2, "length_m = 3.2166666666666667", "length_m = 5.9384615384615385");
  CHECK_THROWS_AS(parse_config(text), InvariantError);
}

TEST_CASE("parse errors name the key") {
  CHECK(error_key<ParseError>(replace(kFig2, "amplitude_ratio = 0.1", "amplitude_ratio = zero")) == "bus_coupler.amplitude_ratio");
  CHECK(error_key<ParseError>(replace(kFig2, "points = 20001", "points = 2.5")) == "grid.points");
  CHECK(error_key<ParseError>(replace(kFig2, "[grid]", "[grid]\nspan_rad_s = 1")) == "grid.span_hz");
  CHECK(error_key<ParseError>(std::string(kFig2) + "\n[bogus]\nx = 1\n") == "bogus");
  CHECK(error_key<ParseError>(replace(kFig2, "points = 20001", "pionts = 20001")) == "grid.pionts");
  CHECK(error_key<ParseError>(replace(kFig2, "RingWithAux", "Donut")) == "topology.variant");
  CHECK(error_key<MissingKeyError>(replace(kFig2, "group_velocity_m_s = 2.0651e8\nroundtrip_power_loss = 0.05\n\n[aux", "roundtrip_power_loss = 0.05\n\n[aux")) == "main_ring.group_velocity_m_s");
  CHECK(error_key<InvariantError>(replace(kFig2, "amplitude_ratio = 0.5", "amplitude_ratio = 1.5")) == "aux_coupler.amplitude_ratio");
}

TEST_CASE("config errors share a base class") {
  CHECK_THROWS_AS(parse_config("[topology]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("garbage without sections\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("sections for other variants are rejected") {
  std::string text = replace(kFig2, "variant = RingWithAux", "variant = SingleRing");
  CHECK(error_key<InvariantError>(text) == "aux_ring");
}

TEST_CASE("hz and rad/s inputs agree") {
  const auto a = parse_config(replace(kFig2, "span_hz = 64.2e6", "span_rad_s = 403380496.72092944"));
  const auto b = parse_config(kFig2);
  CHECK(a.grid->span == Approx(b.grid->span).epsilon(1e-12));
  const auto m = parse_config(std::string(kFig2) + "[modulation]\nfrequency_hz = auto\nphase_depth_rad = 0.3\n");
  CHECK_FALSE(m.topology.modulation.frequency);
  CHECK(m.topology.modulation.enabled);
  CHECK(error_key<ParseError>(std::string(kFig2) + "[drive]\ndetuning_hz = auto\n") == "drive.detuning_hz");
}

TEST_CASE("serialize / parse round trip is exact") {
  auto c = parse_config(std::string(kFig2) + R"(
[modulation]
frequency_hz = 5.28e6
phase_depth_rad = 0.1
phase_offset_rad = 0.3

[drive]
detuning_hz = 1234.5
input_site = 4

[sweep]
span_hz = 1.1e6
points = 41

[analysis]
fit_n_max = 12

[lattice]
kind = chain
sites = 9
hopping_hz = 12345.678
)");
  const auto text = serialize(c);
  const auto back = parse_config(text);
  CHECK(back == c);
  CHECK(serialize(back) == text);

  auto ladder = parse_config(R"(
[topology]
variant = TwoRingLadder
[main_ring]
length_m = 1
group_velocity_m_s = 1
roundtrip_power_loss = 0.02
[right_ring]
length_m = 1
group_velocity_m_s = 1
roundtrip_power_loss = 0.1
[bus_coupler]
amplitude_ratio = 0.2
[inter_ring_coupler]
amplitude_ratio = 0.3
[modulation]
phase_depth_rad = 0.2
[right_modulation]
phase_offset_rad = 1.5707963267948966
)");
  CHECK(parse_config(serialize(ladder)) == ladder);
  CHECK(ladder.topology.right_modulation->phase_offset == Approx(std::numbers::pi / 2));
  CHECK(ladder.topology.right_modulation->phase_depth == 0.2);
}

TEST_CASE("resolve_lattice derives rates from the topology") {
  const auto c = parse_config(std::string(kFig2) + "[modulation]\nphase_depth_rad = 0.2\n[lattice]\nsites = 9\n");
  const auto l = resolve_lattice(c);
  CHECK(l.sites == 9);
  CHECK(l.hopping == Approx(0.1 / c.topology.main_ring.roundtrip_time()));
  CHECK(l.site_loss_rate == Approx(1.0 / photon_lifetime(c.topology.main_ring, {c.topology.bus_coupler})));
}

TEST_CASE("run option bounds") {
  CHECK(error_key<InvariantError>(std::string(kFig2) + "[run]\nsettle_lifetimes = 5\n") == "run.settle_lifetimes");
  CHECK(error_key<InvariantError>(std::string(kFig2) + "[sweep]\npoints = 3\n") == "sweep.span");
}
