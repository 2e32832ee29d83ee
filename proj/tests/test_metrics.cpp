#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "support/stats.hpp"
#include "xraynet/metrics.hpp"
#include "xraynet/errors.hpp"
#include "xraynet/rng.hpp"

using namespace xraynet;

namespace {

ConfusionMatrix makeCm(std::vector<std::vector<long>> counts,
                       std::vector<std::string> names) {
    ConfusionMatrix cm;
    cm.counts = std::move(counts);
    cm.classNames = std::move(names);
    return cm;
}

const ClassMetrics& byName(const std::vector<ClassMetrics>& all, const std::string& name) {
    for (const ClassMetrics& m : all) {
        if (m.className == name) {
            return m;
        }
    }
    throw std::runtime_error("class not found: " + name);
}

}  // namespace

TEST_CASE("confusion matrix construction") {
    const ConfusionMatrix diag =
        confusionFromPredictions({0, 1, 1, 0}, {0, 1, 1, 0}, {"covid", "normal"});
    CHECK(diag.counts[0][0] == 2);
    CHECK(diag.counts[1][1] == 2);
    CHECK(diag.counts[0][1] == 0);
    CHECK(diag.counts[1][0] == 0);

    CHECK_THROWS_AS(confusionFromPredictions({0}, {0, 1}, {"a", "b"}), UsageError);
    CHECK_THROWS_AS(confusionFromPredictions({0}, {5}, {"covid", "normal"}), UsageError);

    Rng rng(3);
    std::vector<int> actual, predicted;
    for (int i = 0; i < 137; ++i) {
        actual.push_back(static_cast<int>(rng.nextBelow(3)));
        predicted.push_back(static_cast<int>(rng.nextBelow(3)));
    }
    const ConfusionMatrix random =
        confusionFromPredictions(actual, predicted, {"covid", "normal", "pneumonia"});
    CHECK(random.total() == 137);
}

// The published two-class evaluation outcomes are fixed test vectors: the
// confusion matrices must reproduce the reported metric tables.
TEST_CASE("two-class binary metrics match the published tables") {
    // 120-image test set: 38/1 | 0/81
    const ConfusionMatrix unet = makeCm({{38, 1}, {0, 81}}, {"covid", "normal"});
    CHECK(accuracyFromConfusion(unet) == doctest::Approx(0.9917).epsilon(0.0005));
    const auto unetMetrics = metricsFromConfusion(unet);
    const ClassMetrics& uCovid = byName(unetMetrics, "covid");
    const ClassMetrics& uNormal = byName(unetMetrics, "normal");
    CHECK(uCovid.recall == doctest::Approx(0.9744).epsilon(0.0005));
    CHECK(uCovid.specificity == doctest::Approx(1.0));
    CHECK(uCovid.precision == doctest::Approx(1.0));
    CHECK(uNormal.precision == doctest::Approx(0.99).epsilon(0.005));
    CHECK(uCovid.f1 == doctest::Approx(0.99).epsilon(0.005));
    CHECK(uNormal.f1 == doctest::Approx(0.99).epsilon(0.005));

    // 39/0 | 1/80
    const ConfusionMatrix wnet = makeCm({{39, 0}, {1, 80}}, {"covid", "normal"});
    CHECK(accuracyFromConfusion(wnet) == doctest::Approx(0.9917).epsilon(0.0005));
    const auto wnetMetrics = metricsFromConfusion(wnet);
    const ClassMetrics& wCovid = byName(wnetMetrics, "covid");
    CHECK(wCovid.recall == doctest::Approx(1.0));
    CHECK(wCovid.specificity == doctest::Approx(0.9877).epsilon(0.0005));
    CHECK(wCovid.precision == doctest::Approx(0.97).epsilon(0.005));
}

TEST_CASE("three-class one-vs-rest metrics match the published tables") {
    const ConfusionMatrix unet =
        makeCm({{40, 0, 0}, {0, 77, 3}, {1, 2, 77}}, {"covid", "normal", "pneumonia"});
    CHECK(accuracyFromConfusion(unet) == doctest::Approx(0.97).epsilon(0.005));
    const auto m = metricsFromConfusion(unet);
    CHECK(byName(m, "covid").recall == doctest::Approx(1.0));
    CHECK(byName(m, "covid").specificity == doctest::Approx(0.99375));
    CHECK(byName(m, "normal").recall == doctest::Approx(0.9625));
    CHECK(byName(m, "normal").specificity == doctest::Approx(0.98333).epsilon(0.0001));
    CHECK(byName(m, "pneumonia").recall == doctest::Approx(0.9625));
    CHECK(byName(m, "pneumonia").specificity == doctest::Approx(0.9750));

    const ConfusionMatrix wnet =
        makeCm({{40, 0, 0}, {0, 78, 2}, {0, 3, 77}}, {"covid", "normal", "pneumonia"});
    CHECK(accuracyFromConfusion(wnet) == doctest::Approx(0.975));
    const auto w = metricsFromConfusion(wnet);
    CHECK(byName(w, "covid").precision == doctest::Approx(1.0));
    CHECK(byName(w, "covid").recall == doctest::Approx(1.0));
    CHECK(byName(w, "covid").specificity == doctest::Approx(1.0));
    CHECK(byName(w, "normal").recall == doctest::Approx(0.975));
    CHECK(byName(w, "pneumonia").recall == doctest::Approx(0.9625));
    CHECK(byName(w, "pneumonia").specificity == doctest::Approx(0.98333).epsilon(0.0001));
}

TEST_CASE("degenerate 0/0 ratios are defined as 0 and flagged") {
    const ConfusionMatrix cm = makeCm({{0, 0}, {0, 5}}, {"covid", "normal"});
    const auto m = metricsFromConfusion(cm);
    const ClassMetrics& covid = byName(m, "covid");
    CHECK(covid.precision == 0.0);
    CHECK(covid.recall == 0.0);
    CHECK(covid.f1 == 0.0);
    CHECK(covid.degenerate);

    CHECK_THROWS_AS(metricsFromConfusion(makeCm({{0, 0}, {0, 0}}, {"a", "b"})), UsageError);
}

TEST_CASE("binary recall/specificity duality on random matrices") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const long a = 1 + static_cast<long>(rng.nextBelow(50));
        const long b = static_cast<long>(rng.nextBelow(10));
        const long c = static_cast<long>(rng.nextBelow(10));
        const long d = 1 + static_cast<long>(rng.nextBelow(50));
        const ConfusionMatrix cm = makeCm({{a, b}, {c, d}}, {"covid", "normal"});
        const auto m = metricsFromConfusion(cm);
        CHECK(byName(m, "covid").recall == doctest::Approx(byName(m, "normal").specificity));
        CHECK(byName(m, "normal").recall == doctest::Approx(byName(m, "covid").specificity));
        CHECK(accuracyFromConfusion(cm) ==
              doctest::Approx(static_cast<double>(a + d) / static_cast<double>(a + b + c + d)));
    }
}

TEST_CASE("roc perfect separation and hand-computed AUC") {
    const RocCurve perfect = rocCurve({0.9, 0.9, 0.1, 0.1}, {1, 1, 0, 0});
    CHECK(perfect.auc == doctest::Approx(1.0));

    // positives [0.8, 0.4], negatives [0.6, 0.2]: 3 of 4 pairs won
    const RocCurve partial = rocCurve({0.8, 0.4, 0.6, 0.2}, {1, 1, 0, 0});
    CHECK(partial.auc == doctest::Approx(0.75));

    CHECK_THROWS_AS(rocCurve({0.5, 0.6}, {1, 1}), UsageError);
    CHECK_THROWS_AS(rocCurve({0.5, 0.6}, {0, 0}), UsageError);
    CHECK_THROWS_AS(rocCurve({}, {}), UsageError);
}

TEST_CASE("roc staircase is monotone and anchored") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 50; ++i) {
            // quantized scores force ties
            scores.push_back(std::floor(rng.nextUniform() * 8.0) / 8.0);
            labels.push_back(static_cast<int>(rng.nextBelow(2)));
        }
        if (std::count(labels.begin(), labels.end(), 1) == 0 ||
            std::count(labels.begin(), labels.end(), 0) == 0) {
            continue;
        }
        const RocCurve curve = rocCurve(scores, labels);
        REQUIRE(curve.points.size() >= 2);
        CHECK(curve.points.front().fpr == 0.0);
        CHECK(curve.points.front().tpr == 0.0);
        CHECK(curve.points.back().fpr == doctest::Approx(1.0));
        CHECK(curve.points.back().tpr == doctest::Approx(1.0));
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
            CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
        }
        CHECK(curve.auc >= 0.0);
        CHECK(curve.auc <= 1.0);
    }
}

TEST_CASE("trapezoidal AUC equals the Mann-Whitney pair count") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        const int n = 10 + static_cast<int>(rng.nextBelow(40));
        bool sawPos = false, sawNeg = false;
        for (int i = 0; i < n; ++i) {
            scores.push_back(std::floor(rng.nextUniform() * 16.0) / 16.0);
            const int label = static_cast<int>(rng.nextBelow(2));
            labels.push_back(label);
            sawPos = sawPos || label == 1;
            sawNeg = sawNeg || label == 0;
        }
        if (!sawPos || !sawNeg) {
            continue;
        }
        const double trapezoid = rocCurve(scores, labels).auc;
        const double pairCount = testsupport::mannWhitneyAuc(scores, labels);
        CHECK(std::abs(trapezoid - pairCount) < 1e-12);
    }
}

TEST_CASE("shuffled labels give a chance-level AUC") {
    Rng rng(7);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) {
        scores.push_back(rng.nextUniform());
        labels.push_back(static_cast<int>(rng.nextBelow(2)));
    }
    const RocCurve curve = rocCurve(scores, labels);
    CHECK(curve.auc > 0.45);
    CHECK(curve.auc < 0.55);
}

TEST_CASE("report writing, schema, and round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() /
        ("xraynet_report_" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);

    const ConfusionMatrix cm = makeCm({{38, 1}, {0, 81}}, {"covid", "normal"});
    std::vector<RocCurve> curves = {rocCurve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, "covid")};
    const MetricsReport report = buildReport(cm, std::move(curves), "test-model");

    const auto jsonPath = (dir / "report.json").string();
    const auto csvPath = (dir / "roc.csv").string();
    writeReport(report, jsonPath, csvPath);

    std::ifstream is(jsonPath);
    nlohmann::json j;
    is >> j;
    CHECK(j.at("schemaVersion").get<int>() == 1);
    CHECK(j.at("accuracy").get<double>() == doctest::Approx(report.accuracy).epsilon(1e-12));
    REQUIRE(j.at("classes").size() == 2);
    CHECK(j.at("classes")[0].at("name") == "covid");
    CHECK(j.at("classes")[0].at("precision").get<double>() ==
          doctest::Approx(report.classes[0].precision).epsilon(1e-12));
    CHECK(j.at("classes")[0].at("recall").get<double>() ==
          doctest::Approx(report.classes[0].recall).epsilon(1e-12));
    CHECK(j.at("confusion")[0][0].get<long>() == 38);
    CHECK(j.at("auc").at("covid").get<double>() == doctest::Approx(1.0));

    // rendered at four decimals the values match the reported table
    auto round4 = [](double v) { return std::round(v * 10000.0) / 10000.0; };
    CHECK(round4(j.at("classes")[0].at("precision").get<double>()) == 1.0);
    CHECK(round4(j.at("classes")[0].at("recall").get<double>()) == 0.9744);

    std::ifstream csv(csvPath);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "class,fpr,tpr");

    CHECK_THROWS_AS(writeReport(report, "", csvPath), IoError);

    fs::remove_all(dir);
}
