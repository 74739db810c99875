#include <cmath>

#include "doctest.h"
#include "escalate/error.hpp"
#include "escalate/observation.hpp"
#include "oracle.hpp"

using namespace escalate;
using json = nlohmann::json;

namespace {

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Tasks a, b, c. Observable u feeds a and b, v feeds b, w feeds nothing useful
// but c (so c only ever sees w).
ModelSpec small() {
    return parse_model_json(json::parse(R"({
      "format": 1,
      "states": [{"id": "N", "name": "n"}, {"id": "S", "name": "s"}],
      "edges": [],
      "priors": {"N": 0.5, "S": 0.5},
      "tasks": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
      "task_state_incidence": {"S": ["a", "b", "c"]},
      "neutral_task_probs": {"a": 0.1, "b": 0.2, "c": 0.3},
      "p_plus": {"S": 0.4},
      "observables": [{"id": "u", "mean": 1.0, "sd": 2.0},
                      {"id": "v", "mean": 0.0, "sd": 0.5},
                      {"id": "w", "mean": -1.0, "sd": 1.0}],
      "observable_task_incidence": {"u": ["a", "b"], "v": ["b"], "w": ["c"]},
      "likelihood_params": {"a": {"x0": 0.0, "k0": 1.0, "k1": 3.0}},
      "holding_params": {"S": 0.5}
    })"));
}

}  // namespace

TEST_CASE("normalize standardizes and keeps missing values missing") {
    const auto spec = small();
    const ObservationRecord rec{3, {5.0, std::nullopt, -1.0}};
    const auto n = normalize(rec, spec);
    REQUIRE(n.size() == 3);
    CHECK(*n[0] == 2.0);
    CHECK_FALSE(n[1].has_value());
    CHECK(*n[2] == 0.0);
    CHECK(error_code([&] { normalize(ObservationRecord{1, {1.0}}, spec); }) == "DIMENSION_MISMATCH");
}

TEST_CASE("filter averages the present incident observables per task") {
    const auto spec = small();
    auto z = intensities(ObservationRecord{1, {5.0, 1.0, std::nullopt}}, spec);
    CHECK(*z.z[0] == 2.0);
    CHECK(*z.z[1] == doctest::Approx((2.0 + 2.0) / 2));
    CHECK_FALSE(z.z[2].has_value());

    z = intensities(ObservationRecord{1, {std::nullopt, 1.0, 0.0}}, spec);
    CHECK_FALSE(z.z[0].has_value());
    CHECK(*z.z[1] == 2.0);
    CHECK(*z.z[2] == 1.0);

    z = intensities(empty_record(spec, 4), spec);
    for (const auto& v : z.z) CHECK_FALSE(v.has_value());

    const ObservationRecord rec{2, {0.3, -0.4, 2.5}};
    const auto ref = oracle::intensity(spec, rec);
    z = intensities(rec, spec);
    for (std::size_t k = 0; k < 3; ++k) CHECK(*z.z[k] == doctest::Approx(*ref[k]).epsilon(1e-15));
}

TEST_CASE("asymmetric logistic is continuous at the shift and complementary") {
    const LogisticParams p{0.5, 1.0, 5.0};
    CHECK(logistic_g(0.5, true, p) == 0.5);
    CHECK(logistic_g(0.5 - 1e-9, true, p) == doctest::Approx(0.5));
    CHECK(logistic_g(0.5 + 1e-9, true, p) == doctest::Approx(0.5));
    for (double x : {-30.0, -2.0, 0.0, 0.49, 0.5, 0.51, 1.0, 3.0, 30.0}) {
        CAPTURE(x);
        CHECK(logistic_g(x, true, p) + logistic_g(x, false, p) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(logistic_g(x, true, p) == doctest::Approx(oracle::g(x, true, p)).epsilon(1e-14));
        CHECK(std::exp(log_logistic_g(x, false, p)) == doctest::Approx(logistic_g(x, false, p)).epsilon(1e-13));
    }
    // Steeper above the shift than below.
    CHECK(logistic_g(1.5, true, p) - 0.5 > 0.5 - logistic_g(-0.5, true, p));
    // Log form stays finite far in the tails.
    CHECK(std::isfinite(log_logistic_g(-1000.0, true, p)));
    CHECK(log_logistic_g(-1000.0, true, p) == doctest::Approx(-1000.5).epsilon(1e-12));
}

TEST_CASE("undefined intensities give flat, uninformative task likelihoods") {
    const auto spec = small();
    const auto like = task_likelihoods(intensities(ObservationRecord{1, {5.0, std::nullopt, std::nullopt}}, spec), spec);
    CHECK(like.informative == std::vector<bool>{true, true, false});
    CHECK(like.log_g[2][0] == std::log(0.5));
    CHECK(like.log_g[2][1] == std::log(0.5));
    CHECK(std::exp(like.log_g[0][1]) == doctest::Approx(logistic_g(2.0, true, spec.likelihood_params[0])));
}

TEST_CASE("task set likelihood: average and product modes") {
    const std::vector<double> z = {0.2, 1.7, -0.4};
    const std::vector<LogisticParams> params = {{0.0, 1.0, 3.0}, {1.0, 1.0, 5.0}, {0.5, 2.0, 2.0}};
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
        CAPTURE(mask);
        double sum = 0.0, prod = 1.0;
        std::vector<std::array<double, 2>> log_g;
        for (std::size_t b = 0; b < 3; ++b) {
            const double g = oracle::g(z[b], (mask >> b) & 1U, params[b]);
            sum += g;
            prod *= g;
            log_g.push_back({std::log(oracle::g(z[b], false, params[b])), std::log(oracle::g(z[b], true, params[b]))});
        }
        CHECK(task_set_likelihood(z, mask, params, LikelihoodMode::average) == doctest::Approx(sum / 3).epsilon(1e-14));
        CHECK(task_set_likelihood(z, mask, params, LikelihoodMode::product) == doctest::Approx(prod).epsilon(1e-14));
        CHECK(log_task_set_likelihood(log_g, mask, LikelihoodMode::average) ==
              doctest::Approx(std::log(sum / 3)).epsilon(1e-13));
        CHECK(log_task_set_likelihood(log_g, mask, LikelihoodMode::product) ==
              doctest::Approx(std::log(prod)).epsilon(1e-13));
    }
    CHECK(error_code([] { task_set_likelihood({}, 0, {}, LikelihoodMode::average); }) == "INVALID_ARGUMENT");
    CHECK(error_code([&] { task_set_likelihood(z, 0, {params[0]}, LikelihoodMode::average); }) ==
          "DIMENSION_MISMATCH");
    const std::vector<std::array<double, 2>> dead = {{-INFINITY, -INFINITY}};
    CHECK(log_task_set_likelihood(dead, 0, LikelihoodMode::average) == -INFINITY);
}

TEST_CASE("JSON observation records") {
    const auto spec = small();
    const auto rec = parse_observation(json::parse(R"({"t": 4, "values": {"v": 1.5, "u": null}})"), spec);
    CHECK(rec.t == 4);
    CHECK_FALSE(rec.values[0].has_value());
    CHECK(*rec.values[1] == 1.5);
    CHECK_FALSE(rec.values[2].has_value());  // absent key is missing
    CHECK(parse_observation(to_json(rec, spec), spec) == rec);

    CHECK(error_code([&] { parse_observation(json::parse(R"({"t": 1, "values": {"zz": 1}})"), spec); }) == "SCHEMA");
    CHECK(error_code([&] { parse_observation(json::parse(R"({"t": 1.5})"), spec); }) == "SCHEMA");
    CHECK(error_code([&] { parse_observation(json::parse(R"({"t": 1, "extra": 0})"), spec); }) == "SCHEMA");
    CHECK(error_code([&] { parse_observation(json::parse(R"({"t": 1, "values": {"u": "x"}})"), spec); }) ==
          "SCHEMA");
}

TEST_CASE("CSV observation records") {
    const auto spec = small();
    const auto recs = parse_observation_csv("w,t,u\n1.5,1,\n,2,3\n\n-2,3,0.25\n", spec);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].t == 1);
    CHECK(*recs[0].values[2] == 1.5);
    CHECK_FALSE(recs[0].values[0].has_value());
    CHECK_FALSE(recs[0].values[1].has_value());  // column absent entirely
    CHECK(*recs[1].values[0] == 3.0);
    CHECK_FALSE(recs[1].values[2].has_value());
    CHECK(*recs[2].values[0] == 0.25);

    CHECK(error_code([&] { parse_observation_csv("u,v\n1,2\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("t,zz\n1,2\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("t,u,u\n1,2,3\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("t,u\n1\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("t,u\n1,abc\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("t,u\n1.5,2\n", spec); }) == "PARSE");
    CHECK(error_code([&] { parse_observation_csv("", spec); }) == "PARSE");
}
