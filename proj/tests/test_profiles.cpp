#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "coinfer/profiles.hpp"
#include "coinfer/rng.hpp"

using namespace coinfer;

namespace {

// 3-layer fixture built from the published communication-volume table:
// raw 12.2 KB, boundaries 332.0 / 24.2 KB, result 0.16 KB.
ModelProfile table_fixture() {
  return ModelProfile{"gcode-mn40", 3, {12200, 332000, 24200, 160}, "modelnet40"};
}

}  // namespace

TEST_CASE("lookup returns exact entries") {
  SubtaskLatencyLut lut;
  lut.add("pi4b", "m", 0, 2, 1, 5.0);
  CHECK(lut.lookup("pi4b", "m", 0, 2, 1) == 5.0);
}

TEST_CASE("lookup interpolates linearly between bracketing batch sizes") {
  SubtaskLatencyLut lut;
  lut.add("pi4b", "m", 0, 2, 1, 5.0);
  lut.add("pi4b", "m", 0, 2, 5, 15.0);
  CHECK(lut.lookup("pi4b", "m", 0, 2, 3) == doctest::Approx(10.0));
  CHECK(lut.lookup("pi4b", "m", 0, 2, 2) == doctest::Approx(7.5));
}

TEST_CASE("lookup clamps outside the stored batch range") {
  SubtaskLatencyLut lut;
  lut.add("pi4b", "m", 0, 2, 2, 6.0);
  lut.add("pi4b", "m", 0, 2, 4, 10.0);
  CHECK(lut.lookup("pi4b", "m", 0, 2, 1) == 6.0);
  CHECK(lut.lookup("pi4b", "m", 0, 2, 9) == 10.0);
}

TEST_CASE("lookup on an unknown model names the missing key") {
  SubtaskLatencyLut lut;
  lut.add("pi4b", "m", 0, 2, 1, 5.0);
  CHECK_THROWS_WITH_AS(lut.lookup("pi4b", "zzz", 0, 2, 1),
                       doctest::Contains("zzz"), LookupError);
}

TEST_CASE("empty ranges cost nothing") {
  SubtaskLatencyLut lut;
  CHECK(lut.lookup("pi4b", "m", 2, 2, 1) == 0.0);
}

TEST_CASE("comm_volume matches the published fixture volumes") {
  auto m = table_fixture();
  // The compute-optimal preset for this fixture sits at split 1 (see
  // test below), which ships 332.0 KB.
  CHECK(comm_volume(m, Strategy::pp(1)) == 332000);
  CHECK(comm_volume(m, Strategy::dp()) == 12200);
  CHECK(comm_volume(m, Strategy::pp(3)) == 160);  // device-only: result volume
}

TEST_CASE("comm_volume: DP equals PP(0) for any model") {
  Rng rng(3);
  for (int k = 0; k < 25; ++k) {
    ModelProfile m;
    m.model_id = "m";
    m.n_layers = (int)rng.uniform_int(1, 8);
    for (int b = 0; b <= m.n_layers; ++b)
      m.boundary_volumes.push_back((std::uint64_t)rng.uniform_int(1, 1 << 22));
    CHECK(comm_volume(m, Strategy::dp()) == comm_volume(m, Strategy::pp(0)));
  }
}

TEST_CASE("preset_pp_comm picks the interior argmin") {
  CHECK(preset_pp_comm(table_fixture()) == 2);  // argmin over {332.0, 24.2} KB
}

TEST_CASE("preset_pp_comm breaks ties toward the smaller split") {
  ModelProfile m{"m", 3, {10, 5, 5, 1}, ""};
  CHECK(preset_pp_comm(m) == 1);
}

TEST_CASE("preset_pp_comm requires an interior boundary") {
  ModelProfile m{"m", 1, {10, 5}, ""};
  CHECK_THROWS_AS(preset_pp_comm(m), LookupError);
}

TEST_CASE("preset_pp_comm always lands strictly inside the model") {
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    ModelProfile m;
    m.model_id = "m";
    m.n_layers = (int)rng.uniform_int(2, 9);
    for (int b = 0; b <= m.n_layers; ++b)
      m.boundary_volumes.push_back((std::uint64_t)rng.uniform_int(1, 1000));
    int s = preset_pp_comm(m);
    CHECK(s >= 1);
    CHECK(s <= m.n_layers - 1);
  }
}

TEST_CASE("preset_pp_comp minimizes the summed stage cost") {
  ModelProfile m{"m", 3, {100, 100, 100, 100}, ""};
  SubtaskLatencyLut lut;
  lut.add("dev", "m", 0, 1, 1, 2.0);
  lut.add("dev", "m", 0, 2, 1, 10.0);
  lut.add("srv", "m", 1, 3, 1, 3.0);
  lut.add("srv", "m", 2, 3, 1, 1.0);
  CHECK(preset_pp_comp(m, "dev", "srv", lut) == 1);  // 5 < 11
}

TEST_CASE("preset_pp_comp breaks cost ties by comm volume") {
  ModelProfile m{"m", 3, {100, 100, 10, 100}, ""};
  SubtaskLatencyLut lut;
  lut.add("dev", "m", 0, 1, 1, 2.0);
  lut.add("dev", "m", 0, 2, 1, 3.0);
  lut.add("srv", "m", 1, 3, 1, 3.0);
  lut.add("srv", "m", 2, 3, 1, 2.0);
  // Totals tie at 5; split 2 ships 10 bytes vs 100.
  CHECK(preset_pp_comp(m, "dev", "srv", lut) == 2);
}

TEST_CASE("preset_pp_comp with a single feasible split returns it") {
  ModelProfile m{"m", 2, {100, 50, 10}, ""};
  SubtaskLatencyLut lut;
  lut.add("dev", "m", 0, 1, 1, 2.0);
  lut.add("srv", "m", 1, 2, 1, 3.0);
  CHECK(preset_pp_comp(m, "dev", "srv", lut) == 1);
}

TEST_CASE("preset_pp_comp propagates missing LUT entries") {
  ModelProfile m{"m", 3, {1, 1, 1, 1}, ""};
  SubtaskLatencyLut lut;
  lut.add("dev", "m", 0, 1, 1, 2.0);
  CHECK_THROWS_AS(preset_pp_comp(m, "dev", "srv", lut), LookupError);
}

TEST_CASE("the table fixture's compute preset ships 332 KB") {
  auto m = table_fixture();
  SubtaskLatencyLut lut;
  lut.add("tx2", m.model_id, 0, 1, 1, 12.0);
  lut.add("tx2", m.model_id, 0, 2, 1, 62.0);
  lut.add("srv", m.model_id, 1, 3, 1, 20.0);
  lut.add("srv", m.model_id, 2, 3, 1, 10.0);
  int s = preset_pp_comp(m, "tx2", "srv", lut);
  CHECK(s == 1);
  CHECK(comm_volume(m, Strategy::pp(s)) == 332000);
}

TEST_CASE("lookup stays monotone in batch when stored entries are") {
  Rng rng(17);
  for (int k = 0; k < 20; ++k) {
    SubtaskLatencyLut lut;
    double ms = rng.uniform(1.0, 5.0);
    for (int b : {1, 2, 4, 8}) {
      lut.add("dev", "m", 0, 3, b, ms);
      ms += rng.uniform(0.0, 10.0);  // non-decreasing
    }
    double prev = 0;
    for (int b = 1; b <= 10; ++b) {
      double got = lut.lookup("dev", "m", 0, 3, b);
      CHECK(got >= prev - 1e-12);
      prev = got;
    }
  }
}

TEST_CASE("synthetic LUT generator is internally consistent") {
  ModelProfile m{"m", 4, {100, 100, 100, 100, 100}, ""};
  SubtaskLatencyLut lut;
  Rng rng(5);
  SyntheticLutSpec spec;
  spec.device_kinds = {"dev-a"};
  spec.server_kind = "srv";
  spec.model = &m;
  add_synthetic_entries(lut, spec, rng);
  // Range costs decompose into per-layer sums.
  double whole = lut.lookup("dev-a", "m", 0, 4, 1);
  double parts = lut.lookup("dev-a", "m", 0, 2, 1) + lut.lookup("dev-a", "m", 2, 4, 1);
  CHECK(whole == doctest::Approx(parts));
  // Batch cost per item decreases up to the stored range (sublinear).
  double per1 = lut.lookup("srv", "m", 0, 4, 1) / 1.0;
  double per8 = lut.lookup("srv", "m", 0, 4, 8) / 8.0;
  CHECK(per8 < per1);
}

TEST_CASE("LUT JSON round-trip") {
  SubtaskLatencyLut lut;
  lut.add("pi4b", "m", 0, 2, 1, 5.0);
  lut.add("pi4b", "m", 0, 2, 5, 15.0);
  lut.add("srv", "m", 2, 3, 1, 1.25);
  auto j = lut.to_json();
  auto lut2 = SubtaskLatencyLut::from_json(j);
  CHECK(lut2.to_json().dump() == j.dump());
  CHECK(lut2.lookup("pi4b", "m", 0, 2, 3) == doctest::Approx(10.0));
}
