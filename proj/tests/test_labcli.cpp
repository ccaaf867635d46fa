#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/io.hpp"
#include "shrinkerlab/labcli.hpp"

using namespace shrinkerlab;
namespace fs = std::filesystem;

namespace {

// Message of the ConfigInvalid raised by parsing `text`, or "" if none.
std::string config_error(const std::string& text, std::optional<Scenario> s = std::nullopt) {
  try {
    parse_config(text, s);
  } catch (const ConfigInvalid& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shrinkerlab_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("scenario names") {
  for (auto s : {Scenario::Simulate, Scenario::Spectrum, Scenario::GaugeResidual, Scenario::Separation, Scenario::Rate})
    CHECK(parse_scenario(to_string(s)) == s);
  CHECK_THROWS_AS(parse_scenario("bogus"), ConfigInvalid);
}

TEST_CASE("curve specs") {
  const auto c = parse_curve_spec(" circle(2, 0.5, -1) ");
  CHECK(c.kind == CurveSpec::Kind::Circle);
  CHECK(c.args == std::vector<double>{2, 0.5, -1});
  const auto e = build_curve(parse_curve_spec("ellipse(2,1)"), 64);
  CHECK(e.size() == 64);
  CHECK(std::abs(e[0].x() - 2.0) < 1e-15);
  const auto f = build_curve(parse_curve_spec("fourier(1.2, 3, 0.1, 0, 2, 0, 0.05)"), 128);
  CHECK(std::abs(f[0].norm() - 1.3) < 1e-14);
  for (const char* bad : {"circle", "circle(1, 2)", "ellipse(1)", "fourier(1, 2)", "fourier(1, 0.5, 1, 1)",
                          "square(1)", "circle(x)"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_curve_spec(bad), ConfigInvalid);
  }
  try {
    parse_curve_spec("circle(1,2)", "my_field");
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()).find("my_field") != std::string::npos);
  }
}

TEST_CASE("config errors name the offending key") {
  CHECK(config_error("initial_curves = circle(1)\nm = 64\n") == "ConfigInvalid: scenario: required");
  CHECK(config_error("scenario = separation\n").find("initial_curves") != std::string::npos);
  CHECK(config_error("scenario = spectrum\ninitial_curves = circle(1)\nm = 63\n").find("m: ") != std::string::npos);
  CHECK(config_error("scenario = spectrum\ninitial_curves = circle(1)\nm = 1e3\n").find("m: ") != std::string::npos);
  CHECK(config_error("scenario = spectrum\ninitial_curves = circle(1)\nfoo = 1\n").find("foo: ") != std::string::npos);
  CHECK(config_error("scenario = simulate\ninitial_curves = circle(1)\npicture = mcf\n").find("t_end") !=
        std::string::npos);
  CHECK(config_error("scenario = simulate\ninitial_curves = circle(1)\npicture = rmcf\ntau_end = 1\ncfl = 2\n")
            .find("cfl: ") != std::string::npos);
  CHECK(config_error("scenario = rate\ninitial_curves = circle(1)\nm = 32\n").find("m: ") != std::string::npos);
  CHECK(config_error("scenario = spectrum\ninitial_curves = circle(1)\ninitial_curves = circle(2)\n")
            .find("initial_curves: ") != std::string::npos);
  CHECK(config_error("scenario = spectrum\nno equals sign\n").find("line 2") != std::string::npos);
  CHECK(config_error("scenario = gauge-residual\ninitial_curves = circle(1.4)\ntau_end = 1\n")
            .find("perturb_amplitude") != std::string::npos);
}

TEST_CASE("config defaults and overrides") {
  const auto c = parse_config("# comment\ninitial_curves = ellipse(1.2, 0.8); circle(1)  # trailing\n",
                              Scenario::Separation, {{"m", "128"}});
  CHECK(c.m == 128);
  CHECK(c.initial_curves.size() == 2);
  CHECK(c.tau_end.value() == 8.0);
  CHECK(c.step.cfl == 0.9);
  CHECK(c.entries.at("scenario") == "separation");
  CHECK(canonical_config(c).find("m = 128\n") != std::string::npos);
}

TEST_CASE("seeded perturbation is reproducible") {
  const std::string text = "initial_curves = circle(1.4)\nm = 64\nperturb_amplitude = 0.01\nseed = 7\n";
  const auto a = parse_config(text, Scenario::Spectrum);
  const auto c1 = initial_curve(a, 0), c2 = initial_curve(a, 0);
  for (int j = 0; j < 64; ++j) CHECK(c1[j] == c2[j]);
  const auto b = parse_config(text + "perturb_modes = 2\n", Scenario::Spectrum);
  const auto pert = initial_curve(b, 0);
  double dev = 0.0;
  for (const auto& p : pert.points()) dev = std::max(dev, std::abs(p.norm() - 1.4));
  CHECK(dev > 0.0);
  CHECK(dev <= 2 * 0.01 * std::sqrt(2.0) + 1e-12);
}

TEST_CASE("io helpers") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(format_double(0.1) == "0.10000000000000001");
  const auto c = build_curve(parse_curve_spec("ellipse(1.3, 0.7, 0.2)"), 32);
  const auto back = parse_curve_csv(curve_csv(c));
  for (int j = 0; j < 32; ++j) CHECK(back[j] == c[j]);
  CHECK_THROWS_AS(parse_curve_csv("a,b\n1,2\n"), InvalidCurve);
  CHECK_THROWS_AS(parse_curve_csv("x,y\n1;2\n"), InvalidCurve);
}

TEST_CASE("simulate writes frames, trace and a hashed manifest") {
  const auto dir = scratch("simulate");
  const auto cfg = parse_config(
      "initial_curves = circle(2)\nm = 64\npicture = mcf\nt_end = 10\noutput_interval = 0.02\n"
      "stop_area_fraction = 0.1\n",
      Scenario::Simulate);
  const auto res = run(cfg, dir);
  CHECK(res.exit_code == 0);
  CHECK(std::abs(res.summary.at("singularData").at("T").get<double>() - 2.0) < 1e-3);
  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  CHECK(manifest.at("configHash") == sha256_hex(canonical_config(cfg)));
  CHECK(manifest.at("files").size() >= 3);
  for (const auto& f : manifest.at("files")) {
    const std::string bytes = read_text(dir / f.at("path").get<std::string>());
    CHECK(f.at("sha256") == sha256_hex(bytes));
    CHECK(f.at("bytes") == bytes.size());
  }
  const auto index = nlohmann::json::parse(read_text(dir / "frames" / "flow.json"));
  CHECK(index.at("picture") == "MCF");
  CHECK(index.at("m") == 64);
  CHECK(read_curve(dir / "frames" / "flow_00000.csv").size() == 64);
  fs::remove_all(dir);
}

TEST_CASE("spectrum output") {
  const auto dir = scratch("spectrum");
  const auto cfg = parse_config("initial_curves = circle(1.4142135623730951)\nm = 128\neigen_count = 5\n",
                                Scenario::Spectrum);
  const auto res = run(cfg, dir);
  const auto spec = nlohmann::json::parse(read_text(dir / "spectrum.json"));
  const std::vector<double> expected{1.0, 0.5, 0.5, -1.0, -1.0};
  for (size_t i = 0; i < 5; ++i) CHECK(std::abs(spec.at("eigenvalues")[i].get<double>() - expected[i]) < 1e-9);
  CHECK(fs::exists(dir / "eigenfunctions.csv"));
  CHECK(read_text(dir / "eigenvalues.csv").rfind("index,eigenvalue\n", 0) == 0);
  CHECK(res.summary.at("scenario") == "spectrum");
  fs::remove_all(dir);
}

TEST_CASE("identical curves separate by nothing") {
  const auto cfg = parse_config("initial_curves = ellipse(1.2, 1); ellipse(1.2, 1)\nm = 64\ntau_end = 5\n",
                                Scenario::Separation);
  const auto rep = experiment_separation(cfg);
  CHECK(rep.I_underflow);
  CHECK(rep.verdict == Verdict::Consistent);
  for (double d : rep.dH) CHECK(d == 0.0);
  CHECK(std::abs(rep.singular[0].T - 1.2 / 2.0) < 1e-3);
}
