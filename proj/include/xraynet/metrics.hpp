#pragma once

#include <string>
#include <vector>

namespace xraynet {

// Rows = actual class, columns = predicted class.
struct ConfusionMatrix {
    std::vector<std::vector<long>> counts;
    std::vector<std::string> classNames;

    long total() const;
    long trace() const;
};

ConfusionMatrix confusionFromPredictions(const std::vector<int>& actual,
                                         const std::vector<int>& predicted,
                                         std::vector<std::string> classNames);

struct ClassMetrics {
    std::string className;
    double precision = 0.0;
    double recall = 0.0;  // sensitivity
    double specificity = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some 0/0 ratio was defined as 0
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::string className;
    std::vector<RocPoint> points;
    double auc = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<ClassMetrics> classes;
    ConfusionMatrix confusion;
    std::vector<RocCurve> rocCurves;
    std::string modelId;
};

// One-vs-rest per class: TP = cm[c][c], FN = row c - TP, FP = column c - TP,
// TN = rest; 0/0 ratios are defined as 0 and flagged.
std::vector<ClassMetrics> metricsFromConfusion(const ConfusionMatrix& cm);
double accuracyFromConfusion(const ConfusionMatrix& cm);

// Threshold sweep over the distinct scores; AUC by trapezoidal integration.
// `labels` holds 0/1 with 1 = positive; needs at least one of each.
RocCurve rocCurve(const std::vector<double>& scores, const std::vector<int>& labels,
                  std::string className = "");

MetricsReport buildReport(const ConfusionMatrix& cm, std::vector<RocCurve> rocCurves,
                          std::string modelId);

// JSON report (schemaVersion 1) plus a `class,fpr,tpr` ROC CSV.
void writeReport(const MetricsReport& report, const std::string& jsonPath,
                 const std::string& rocCsvPath);

}  // namespace xraynet
