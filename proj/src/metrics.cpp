#include "xraynet/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "xraynet/errors.hpp"

namespace xraynet {

long ConfusionMatrix::total() const {
    long n = 0;
    for (const auto& row : counts) {
        for (long c : row) {
            n += c;
        }
    }
    return n;
}

long ConfusionMatrix::trace() const {
    long n = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        n += counts[i][i];
    }
    return n;
}

ConfusionMatrix confusionFromPredictions(const std::vector<int>& actual,
                                         const std::vector<int>& predicted,
                                         std::vector<std::string> classNames) {
    if (actual.size() != predicted.size()) {
        throw UsageError("actual and predicted lists have different lengths");
    }
    const int k = static_cast<int>(classNames.size());
    ConfusionMatrix cm;
    cm.classNames = std::move(classNames);
    cm.counts.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] < 0 || actual[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
            std::ostringstream msg;
            msg << "class index out of range at pair " << i;
            throw UsageError(msg.str());
        }
        ++cm.counts[static_cast<std::size_t>(actual[i])][static_cast<std::size_t>(predicted[i])];
    }
    return cm;
}

double accuracyFromConfusion(const ConfusionMatrix& cm) {
    const long n = cm.total();
    if (n == 0) {
        throw UsageError("confusion matrix is empty");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

std::vector<ClassMetrics> metricsFromConfusion(const ConfusionMatrix& cm) {
    const long n = cm.total();
    if (n == 0 || cm.counts.empty()) {
        throw UsageError("confusion matrix is empty");
    }
    const std::size_t k = cm.counts.size();
    std::vector<ClassMetrics> out;
    for (std::size_t c = 0; c < k; ++c) {
        const long tp = cm.counts[c][c];
        long rowSum = 0;
        long colSum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            rowSum += cm.counts[c][j];
            colSum += cm.counts[j][c];
        }
        const long fn = rowSum - tp;
        const long fp = colSum - tp;
        const long tn = n - tp - fn - fp;
        ClassMetrics m;
        m.className = c < cm.classNames.size() ? cm.classNames[c] : std::to_string(c);
        auto ratio = [&m](long num, long den) {
            if (den == 0) {
                m.degenerate = true;
                return 0.0;
            }
            return static_cast<double>(num) / static_cast<double>(den);
        };
        m.precision = ratio(tp, tp + fp);
        m.recall = ratio(tp, tp + fn);
        m.specificity = ratio(tn, tn + fp);
        const double prSum = m.precision + m.recall;
        m.f1 = prSum > 0.0 ? 2.0 * m.precision * m.recall / prSum : 0.0;
        out.push_back(std::move(m));
    }
    return out;
}

RocCurve rocCurve(const std::vector<double>& scores, const std::vector<int>& labels,
                  std::string className) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw UsageError("scores and labels must be equally sized and nonempty");
    }
    long positives = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw UsageError("roc labels must be 0 or 1");
        }
        positives += l;
    }
    const long negatives = static_cast<long>(labels.size()) - positives;
    if (positives == 0 || negatives == 0) {
        throw UsageError("roc needs at least one positive and one negative label");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.className = std::move(className);
    curve.points.push_back({0.0, 0.0});
    long tp = 0;
    long fp = 0;
    double auc = 0.0;
    double prevFpr = 0.0;
    double prevTpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Advance over a tie group so equal scores move diagonally in one step.
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels[order[i]] == 1) {
                ++tp;
            } else {
                ++fp;
            }
            ++i;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        auc += (fpr - prevFpr) * (tpr + prevTpr) / 2.0;
        curve.points.push_back({fpr, tpr});
        prevFpr = fpr;
        prevTpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

MetricsReport buildReport(const ConfusionMatrix& cm, std::vector<RocCurve> rocCurves,
                          std::string modelId) {
    MetricsReport report;
    report.accuracy = accuracyFromConfusion(cm);
    report.classes = metricsFromConfusion(cm);
    report.confusion = cm;
    report.rocCurves = std::move(rocCurves);
    report.modelId = std::move(modelId);
    return report;
}

void writeReport(const MetricsReport& report, const std::string& jsonPath,
                 const std::string& rocCsvPath) {
    nlohmann::json j;
    j["schemaVersion"] = 1;
    j["model"] = report.modelId;
    j["accuracy"] = report.accuracy;
    j["classes"] = nlohmann::json::array();
    for (const ClassMetrics& m : report.classes) {
        j["classes"].push_back({{"name", m.className},
                                {"precision", m.precision},
                                {"recall", m.recall},
                                {"specificity", m.specificity},
                                {"f1", m.f1},
                                {"degenerate", m.degenerate}});
    }
    j["confusion"] = report.confusion.counts;
    j["classNames"] = report.confusion.classNames;
    nlohmann::json auc = nlohmann::json::object();
    for (const RocCurve& c : report.rocCurves) {
        auc[c.className] = c.auc;
    }
    j["auc"] = auc;

    std::ofstream os(jsonPath, std::ios::trunc);
    if (!os) {
        throw IoError("cannot open report for writing: " + jsonPath);
    }
    os << j.dump(2) << "\n";
    if (!os) {
        throw IoError("write failed for report: " + jsonPath);
    }

    std::ofstream csv(rocCsvPath, std::ios::trunc);
    if (!csv) {
        throw IoError("cannot open ROC CSV for writing: " + rocCsvPath);
    }
    csv << "class,fpr,tpr\n";
    csv.precision(17);
    for (const RocCurve& c : report.rocCurves) {
        for (const RocPoint& p : c.points) {
            csv << c.className << "," << p.fpr << "," << p.tpr << "\n";
        }
    }
    if (!csv) {
        throw IoError("write failed for ROC CSV: " + rocCsvPath);
    }
}

}  // namespace xraynet
