#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rydsense/error.hpp"
#include "rydsense/geometry.hpp"
#include "test_support.hpp"

using namespace rydsense;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an rydsense::Error");
  return ErrorCode::IoError;
}

ArrayGeometry single_row(int n, double spacing) {
  ArrayGeometry g;
  g.rows.push_back({n, spacing, 0.0});
  return g;
}

}  // namespace

TEST_CASE("atom_positions lays rows out row-major with ascending x") {
  const auto three = atom_positions(single_row(3, 15.0));
  REQUIRE(three.size() == 3);
  CHECK(three[0].x_um == 0.0);
  CHECK(three[1].x_um == 15.0);
  CHECK(three[2].x_um == 30.0);
  CHECK(three[2].index == 3);

  const auto one = atom_positions(single_row(1, 5.0));
  REQUIRE(one.size() == 1);
  CHECK(one[0].x_um == 0.0);
  CHECK(one[0].y_um == 0.0);

  ArrayGeometry two;
  two.rows = {{3, 15.0, 0.0}, {2, 20.0, 200.0}};
  const auto sites = atom_positions(two);
  REQUIRE(sites.size() == 5);
  CHECK(sites[3].row == 1);
  CHECK(sites[3].x_um == 0.0);
  CHECK(sites[4].x_um == 20.0);
  CHECK(sites[4].y_um == 200.0);
}

TEST_CASE("shifting a row's y offset only moves its y coordinates") {
  ArrayGeometry g;
  g.rows = {{4, 10.0, 0.0}, {3, 20.0, 150.0}};
  auto shifted = g;
  shifted.rows[1].y_offset_um = 400.0;
  const auto a = atom_positions(g);
  const auto b = atom_positions(shifted);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].x_um == b[k].x_um);
    CHECK(a[k].y_um == (a[k].row == 1 ? b[k].y_um - 250.0 : b[k].y_um));
  }
}

TEST_CASE("geometry validation enforces pitch multiples and row decoupling") {
  CHECK(code_of([] { single_row(3, 12.0).validate(); }) == ErrorCode::InvalidGeometry);
  CHECK(code_of([] { single_row(3, 2.5).validate(); }) == ErrorCode::InvalidGeometry);
  CHECK(code_of([] { single_row(0, 5.0).validate(); }) == ErrorCode::InvalidGeometry);
  ArrayGeometry close;
  close.rows = {{3, 15.0, 0.0}, {3, 20.0, 99.0}};
  CHECK(code_of([&] { close.validate(); }) == ErrorCode::InvalidGeometry);
  ArrayGeometry unordered;
  unordered.rows = {{3, 15.0, 200.0}, {3, 20.0, 0.0}};
  CHECK(code_of([&] { unordered.validate(); }) == ErrorCode::InvalidGeometry);
  ArrayGeometry ok;
  ok.rows = {{3, 15.0, 0.0}, {3, 20.0, 100.0}};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("field_at evaluates each profile kind") {
  const auto sites = atom_positions(single_row(19, 15.0));
  CHECK(field_at(UniformField{25.0}, sites[7], 19).value == 25.0);

  const double e_res = 29.787;
  const GradientField gradient{2.0 * e_res, 0.0};
  CHECK(field_at(gradient, sites[9], 19).value == doctest::Approx(e_res).epsilon(1e-15));
  CHECK(field_at(gradient, sites[0], 19).value == 2.0 * e_res);
  CHECK(field_at(gradient, sites[18], 19).value == 0.0);

  const auto sinusoid = resonant_sinusoid(e_res, 5.0, 10.0);
  CHECK(field_at(sinusoid, sites[4], 19).value == doctest::Approx(e_res).epsilon(1e-14));
  CHECK(field_at(sinusoid, sites[14], 19).value == doctest::Approx(e_res).epsilon(1e-14));
  CHECK(field_at(sinusoid, sites[9], 19).value == doctest::Approx(0.0).scale(e_res).epsilon(1e-14));
  for (int i = 0; i < 19; ++i) CHECK(field_at(sinusoid, sites[static_cast<std::size_t>(i)], 19).value <= e_res + 1e-12);

  const GaussianField gaussian{5.0, 30.0, 135.0, 20.0};
  CHECK(field_at(gaussian, sites[9], 19).value == 30.0);
  CHECK(field_at(gaussian, sites[10], 19).value ==
        doctest::Approx(5.0 + 25.0 * std::exp(-0.5 * 0.75 * 0.75)).epsilon(1e-14));

  const TabulatedField tab{{1.0, 2.0, 4.0}};
  const auto three = atom_positions(single_row(3, 5.0));
  CHECK(field_at(tab, three[2], 3).value == 4.0);
}

TEST_CASE("pair_field evaluates the profile at the pair midpoint") {
  const auto sites = atom_positions(single_row(5, 10.0));
  const UniformField uniform{17.0};
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      CHECK(pair_field(uniform, sites[i], sites[j], 5).value == field_at(uniform, sites[i], 5).value);
    }
  }
  const GradientField gradient{40.0, 0.0};
  const double expected = 0.5 * (field_at(gradient, sites[0], 5).value + field_at(gradient, sites[3], 5).value);
  CHECK(pair_field(gradient, sites[0], sites[3], 5).value == doctest::Approx(expected).epsilon(1e-15));

  // Atoms at x = 10 and 30 straddle a peak at x = 15: midpoint x = 20 is 5 um from the center.
  const GaussianField gaussian{0.0, 30.0, 15.0, 10.0};
  const double hand = 30.0 * std::exp(-0.5 * 0.25);
  CHECK(pair_field(gaussian, sites[1], sites[3], 5).value == doctest::Approx(hand).epsilon(1e-15));

  const auto tab_mid = pair_field(TabulatedField{{0.0, 10.0, 20.0, 30.0, 40.0}}, sites[0], sites[1], 5);
  CHECK(tab_mid.value == doctest::Approx(5.0).epsilon(1e-15));

  ArrayGeometry two;
  two.rows = {{2, 10.0, 0.0}, {2, 10.0, 100.0}};
  const auto all = atom_positions(two);
  CHECK(code_of([&] { pair_field(uniform, all[0], all[2], 2); }) == ErrorCode::CrossRowPair);
}

TEST_CASE("symmetric profiles reflect about the row center") {
  const int n = 19;
  const auto sites = atom_positions(single_row(n, 15.0));
  const double center = 0.5 * (n - 1) * 15.0;
  const GaussianField gaussian{0.0, 29.787, center, 30.0};
  const auto sinusoid = resonant_sinusoid(29.787, 5.0, 10.0);
  for (int i = 1; i <= n; ++i) {
    const auto& a = sites[static_cast<std::size_t>(i - 1)];
    const auto& b = sites[static_cast<std::size_t>(n - i)];
    CHECK(field_at(gaussian, a, n).value == doctest::Approx(field_at(gaussian, b, n).value).epsilon(1e-14));
    CHECK(field_at(sinusoid, a, n).value ==
          doctest::Approx(field_at(sinusoid, b, n).value).scale(29.787).epsilon(1e-13));
  }
}

TEST_CASE("validate_profile checks atoms and pair midpoints against the table span") {
  const auto& table = testing_support::fixture_table();
  auto g = single_row(19, 15.0);
  CHECK_NOTHROW(validate_profile(UniformField{25.0}, g, 0, table));
  CHECK(code_of([&] { validate_profile(GradientField{2.0 * 29.787, 0.0}, g, 0, table); }) ==
        ErrorCode::FieldOutOfTableRange);
  CHECK(code_of([&] { validate_profile(UniformField{-1.0}, g, 0, table); }) == ErrorCode::FieldOutOfTableRange);
  CHECK(code_of([&] { validate_profile(TabulatedField{{1.0, 2.0}}, g, 0, table); }) == ErrorCode::InvalidProfile);
}
