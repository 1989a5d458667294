#include "clickbait/eval.hpp"

#include "clickbait/csv.hpp"
#include "clickbait/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace clickbait::eval {

using nlohmann::json;

namespace {

void require_nonempty(std::span<const Scored> s) {
    if (s.empty()) {
        throw ValidationError("scored", "no predictions to evaluate");
    }
}

void count_classes(std::span<const Scored> s, std::size_t& pos, std::size_t& neg) {
    pos = neg = 0;
    for (const auto& x : s) {
        if (x.label != 0 && x.label != 1) {
            throw ValidationError("label", "labels must be 0 or 1");
        }
        (x.label == 1 ? pos : neg)++;
    }
}

void require_both_classes(std::span<const Scored> s) {
    std::size_t pos, neg;
    count_classes(s, pos, neg);
    if (pos == 0 || neg == 0) {
        throw ValidationError("labels", "both classes must be present");
    }
}

double ratio(std::size_t num, std::size_t den, bool& zeroFlag) {
    if (den == 0) {
        zeroFlag = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double f1(double p, double r) {
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

} // namespace

EvalReport binary_metrics(std::span<const Scored> scored, double threshold) {
    require_nonempty(scored);
    EvalReport r;
    r.count = scored.size();
    r.threshold = threshold;
    std::size_t pos = 0, neg = 0;
    count_classes(scored, pos, neg);
    auto& c = r.confusion;
    for (const auto& s : scored) {
        const bool predicted = s.probability >= threshold;
        if (s.label == 1) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    const double n = static_cast<double>(r.count);
    r.accuracy = static_cast<double>(c.tp + c.tn) / n;

    bool zp = false, zr = false;
    r.precisionPos = ratio(c.tp, c.tp + c.fp, zp);
    r.recallPos = ratio(c.tp, c.tp + c.fn, zr);
    r.f1Pos = f1(r.precisionPos, r.recallPos);
    const double precisionNeg = ratio(c.tn, c.tn + c.fn, zp);
    const double recallNeg = ratio(c.tn, c.tn + c.fp, zr);
    const double f1Neg = f1(precisionNeg, recallNeg);
    r.zeroDivisionPrecision = zp;
    r.zeroDivisionRecall = zr;

    const double wp = static_cast<double>(pos) / n;
    const double wn = static_cast<double>(neg) / n;
    r.precisionWeighted = wp * r.precisionPos + wn * precisionNeg;
    r.recallWeighted = wp * r.recallPos + wn * recallNeg;
    r.f1Weighted = wp * r.f1Pos + wn * f1Neg;
    r.mseHardLabel = mse(scored, MseTarget::HardLabel);
    return r;
}

double mse(std::span<const Scored> scored, MseTarget target) {
    require_nonempty(scored);
    double sum = 0.0;
    for (const auto& s : scored) {
        double t;
        if (target == MseTarget::HardLabel) {
            t = s.label;
        } else {
            if (!s.truthMean) {
                throw ValidationError("truthMean", "missing for at least one prediction");
            }
            t = *s.truthMean;
        }
        const double d = s.probability - t;
        sum += d * d;
    }
    return sum / static_cast<double>(scored.size());
}

std::vector<RocPoint> roc_curve(std::span<const Scored> scored) {
    require_both_classes(scored);
    std::size_t pos, neg;
    count_classes(scored, pos, neg);
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scored[a].probability > scored[b].probability; });

    std::vector<RocPoint> points;
    points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double p = scored[order[k]].probability;
        while (k < order.size() && scored[order[k]].probability == p) {
            (scored[order[k]].label == 1 ? tp : fp)++;
            ++k;
        }
        points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), p});
    }
    return points;
}

double auc(std::span<const Scored> scored) {
    require_both_classes(scored);
    // Sort ascending and sweep tie groups: each positive beats every negative
    // strictly below it and draws with negatives in its own group. Counts are
    // kept in integers, doubled to hold the halves.
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scored[a].probability < scored[b].probability; });
    unsigned long long twice_wins = 0;
    std::size_t neg_below = 0, pos_total = 0, neg_total = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double p = scored[order[k]].probability;
        std::size_t gp = 0, gn = 0;
        while (k < order.size() && scored[order[k]].probability == p) {
            (scored[order[k]].label == 1 ? gp : gn)++;
            ++k;
        }
        twice_wins += 2ULL * gp * neg_below + 1ULL * gp * gn;
        neg_below += gn;
        pos_total += gp;
        neg_total += gn;
    }
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    }
    return area;
}

EvalReport evaluate(std::span<const Scored> scored, double threshold) {
    EvalReport r = binary_metrics(scored, threshold);
    if (std::all_of(scored.begin(), scored.end(), [](const Scored& s) { return s.truthMean.has_value(); })) {
        r.mseTruthMean = mse(scored, MseTarget::TruthMean);
    }
    std::size_t pos, neg;
    count_classes(scored, pos, neg);
    if (pos > 0 && neg > 0) {
        r.auc = auc(scored);
        r.rocPoints = roc_curve(scored);
    }
    return r;
}

json EvalReport::to_json() const {
    json roc = json::array();
    for (const auto& p : rocPoints) {
        roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", number_or_null(p.threshold)}});
    }
    return json{{"count", count},
                {"threshold", threshold},
                {"accuracy", accuracy},
                {"mseHardLabel", mseHardLabel},
                {"mseTruthMean", mseTruthMean ? json(*mseTruthMean) : json(nullptr)},
                {"auc", auc ? json(*auc) : json(nullptr)},
                {"precisionPos", precisionPos},
                {"recallPos", recallPos},
                {"f1Pos", f1Pos},
                {"precisionWeighted", precisionWeighted},
                {"recallWeighted", recallWeighted},
                {"f1Weighted", f1Weighted},
                {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}},
                {"zeroDivisionPrecision", zeroDivisionPrecision},
                {"zeroDivisionRecall", zeroDivisionRecall},
                {"rocPoints", roc}};
}

void write_reports_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, EvalReport>>& reports) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    csv::write_row(out, {"dataset", "accuracy", "mse", "auc", "precision", "recall", "f1", "precision_pos",
                         "recall_pos", "f1_pos", "mse_truth_mean", "tp", "fp", "tn", "fn"});
    for (const auto& [name, r] : reports) {
        csv::write_row(out, {name, csv::format_double(r.accuracy), csv::format_double(r.mseHardLabel),
                             r.auc ? csv::format_double(*r.auc) : "", csv::format_double(r.precisionWeighted),
                             csv::format_double(r.recallWeighted), csv::format_double(r.f1Weighted),
                             csv::format_double(r.precisionPos), csv::format_double(r.recallPos),
                             csv::format_double(r.f1Pos), r.mseTruthMean ? csv::format_double(*r.mseTruthMean) : "",
                             std::to_string(r.confusion.tp), std::to_string(r.confusion.fp),
                             std::to_string(r.confusion.tn), std::to_string(r.confusion.fn)});
    }
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    csv::write_row(out, {"fpr", "tpr", "threshold"});
    for (const auto& p : points) {
        csv::write_row(out, {csv::format_double(p.fpr), csv::format_double(p.tpr), csv::format_double(p.threshold)});
    }
}

} // namespace clickbait::eval
