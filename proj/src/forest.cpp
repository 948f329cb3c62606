#include "pmiv/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "pmiv/random.hpp"

namespace pmiv {

namespace {

constexpr std::string_view kModelFormat = "pmiv-forest";
constexpr int kModelVersion = 1;

/// Feature-major copy of the training matrix.
struct ColumnMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    const double* column(std::size_t f) const { return data.data() + f * rows; }
};

struct SplitCandidate {
    double gain = -1.0;
    std::int32_t feature = -1;
    double threshold = 0.0;

    bool better_than(const SplitCandidate& other) const
    {
        if (gain != other.gain) {
            return gain > other.gain;
        }
        if (feature != other.feature) {
            return feature < other.feature;
        }
        return threshold < other.threshold;
    }
};

class TreeBuilder {
public:
    TreeBuilder(const ColumnMatrix& x, std::span<const std::uint8_t> y, const ForestConfig& cfg, std::uint64_t seed)
        : x_(x), y_(y), cfg_(cfg), rng_(seed), max_features_(cfg.max_features.resolve(x.cols)), features_(x.cols)
    {
        std::iota(features_.begin(), features_.end(), 0u);
    }

    DecisionTree grow()
    {
        std::vector<std::uint32_t> samples(x_.rows);
        if (cfg_.bootstrap) {
            for (auto& s : samples) {
                s = static_cast<std::uint32_t>(rng_.below(x_.rows));
            }
        } else {
            std::iota(samples.begin(), samples.end(), 0u);
        }
        samples_ = std::move(samples);

        struct Pending {
            std::int32_t node;
            std::size_t begin, end, depth;
        };
        DecisionTree tree;
        tree.nodes.emplace_back();
        std::vector<Pending> stack{{0, 0, samples_.size(), 0}};
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            auto [malicious, total] = counts(job.begin, job.end);
            tree.nodes[static_cast<std::size_t>(job.node)].p_malicious = malicious / total;

            const bool pure = malicious == 0.0 || malicious == total;
            const bool too_small = job.end - job.begin < cfg_.min_samples_split;
            const bool too_deep = cfg_.max_depth && job.depth >= *cfg_.max_depth;
            if (pure || too_small || too_deep) {
                continue;
            }
            const SplitCandidate best = best_split(job.begin, job.end, malicious, total);
            if (best.feature < 0 || best.gain < cfg_.min_impurity_split) {
                continue;
            }
            const double* col = x_.column(static_cast<std::size_t>(best.feature));
            auto mid = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                      samples_.begin() + static_cast<std::ptrdiff_t>(job.end),
                                      [&](std::uint32_t s) { return col[s] <= best.threshold; });
            const std::size_t split = static_cast<std::size_t>(mid - samples_.begin());

            const auto left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            const auto right = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = left;
            node.right = right;
            // Right first so the left subtree is grown (and numbered) first.
            stack.push_back({right, split, job.end, job.depth + 1});
            stack.push_back({left, job.begin, split, job.depth + 1});
        }
        return tree;
    }

private:
    std::pair<double, double> counts(std::size_t begin, std::size_t end) const
    {
        double malicious = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            malicious += y_[samples_[i]];
        }
        return {malicious, static_cast<double>(end - begin)};
    }

    SplitCandidate best_split(std::size_t begin, std::size_t end, double malicious, double total)
    {
        const double parent = gini(total - malicious, malicious);
        const std::size_t n = end - begin;
        SplitCandidate best;
        std::size_t examined = 0;
        for (std::size_t i = 0; i < features_.size() && examined < max_features_; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng_.below(features_.size() - i));
            std::swap(features_[i], features_[j]);
            const std::uint32_t f = features_[i];
            const double* col = x_.column(f);

            buffer_.clear();
            for (std::size_t k = begin; k < end; ++k) {
                buffer_.emplace_back(col[samples_[k]], y_[samples_[k]]);
            }
            const auto [lo, hi] = std::minmax_element(buffer_.begin(), buffer_.end());
            if (lo->first == hi->first) {
                continue; // constant here: does not count towards max_features
            }
            ++examined;
            std::sort(buffer_.begin(), buffer_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_malicious = 0.0;
            for (std::size_t k = 1; k < n; ++k) {
                left_malicious += buffer_[k - 1].second;
                if (buffer_[k - 1].first == buffer_[k].first) {
                    continue;
                }
                if (k < cfg_.min_samples_leaf || n - k < cfg_.min_samples_leaf) {
                    continue;
                }
                const double nl = static_cast<double>(k);
                const double nr = total - nl;
                const double right_malicious = malicious - left_malicious;
                const double children =
                    (nl * gini(nl - left_malicious, left_malicious) + nr * gini(nr - right_malicious, right_malicious)) /
                    total;
                const double a = buffer_[k - 1].first;
                const double b = buffer_[k].first;
                double threshold = a + (b - a) / 2.0;
                if (!(threshold < b)) {
                    threshold = a;
                }
                const SplitCandidate candidate{parent - children, static_cast<std::int32_t>(f), threshold};
                if (candidate.better_than(best)) {
                    best = candidate;
                }
            }
        }
        return best;
    }

    const ColumnMatrix& x_;
    std::span<const std::uint8_t> y_;
    const ForestConfig& cfg_;
    Rng rng_;
    std::size_t max_features_;
    std::vector<std::uint32_t> features_;
    std::vector<std::uint32_t> samples_;
    std::vector<std::pair<double, std::uint8_t>> buffer_;
};

std::string percent(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
    return buf;
}

Json trees_to_json(const std::vector<DecisionTree>& trees)
{
    Json out = Json::array();
    for (const auto& t : trees) {
        Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
             p = Json::array();
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            p.push_back(n.p_malicious);
        }
        out.push_back(Json{{"feature", std::move(feature)},
                           {"threshold", std::move(threshold)},
                           {"left", std::move(left)},
                           {"right", std::move(right)},
                           {"p_malicious", std::move(p)}});
    }
    return out;
}

} // namespace

std::string_view to_string(Label label) noexcept { return label == Label::Malicious ? "malicious" : "benign"; }

Label parse_label(std::string_view text)
{
    if (text == "malicious" || text == "1" || text == "malware") {
        return Label::Malicious;
    }
    if (text == "benign" || text == "0") {
        return Label::Benign;
    }
    throw DataError("unknown label '" + std::string(text) + "'");
}

std::size_t MaxFeatures::resolve(std::size_t k) const
{
    switch (rule) {
    case Rule::Sqrt:
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k)))));
    case Rule::All:
        return k;
    case Rule::Fixed:
        return std::clamp<std::size_t>(count, 1, std::max<std::size_t>(k, 1));
    }
    return k;
}

ForestConfig ForestConfig::reference()
{
    ForestConfig cfg;
    cfg.n_estimators = 480;
    return cfg;
}

void ForestConfig::validate() const
{
    if (n_estimators < 1) {
        throw DataError("n_estimators must be at least 1");
    }
    if (min_samples_split < 2) {
        throw DataError("min_samples_split must be at least 2");
    }
    if (min_samples_leaf < 1) {
        throw DataError("min_samples_leaf must be at least 1");
    }
    if (max_features.rule == MaxFeatures::Rule::Fixed && max_features.count < 1) {
        throw DataError("max_features must be at least 1");
    }
    if (!(min_impurity_split >= 0.0)) {
        throw DataError("min_impurity_split must be nonnegative");
    }
}

Json to_json(const ForestConfig& cfg)
{
    Json max_features;
    switch (cfg.max_features.rule) {
    case MaxFeatures::Rule::Sqrt:
        max_features = "sqrt";
        break;
    case MaxFeatures::Rule::All:
        max_features = "all";
        break;
    case MaxFeatures::Rule::Fixed:
        max_features = cfg.max_features.count;
        break;
    }
    return Json{
        {"n_estimators", cfg.n_estimators},
        {"max_features", max_features},
        {"criterion", "gini"},
        {"bootstrap", cfg.bootstrap},
        {"max_depth", cfg.max_depth ? Json(*cfg.max_depth) : Json(nullptr)},
        {"min_samples_split", cfg.min_samples_split},
        {"min_samples_leaf", cfg.min_samples_leaf},
        {"min_impurity_split", cfg.min_impurity_split},
        {"seed", cfg.seed},
    };
}

ForestConfig forest_config_from_json(const Json& j)
{
    if (!j.is_object()) {
        throw DataError("forest config must be a JSON object");
    }
    ForestConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "n_estimators") {
                cfg.n_estimators = value.get<std::size_t>();
            } else if (key == "max_features") {
                if (value.is_string() && value == "sqrt") {
                    cfg.max_features = {MaxFeatures::Rule::Sqrt, 0};
                } else if (value.is_string() && (value == "all" || value == "none")) {
                    cfg.max_features = {MaxFeatures::Rule::All, 0};
                } else if (value.is_null()) {
                    cfg.max_features = {MaxFeatures::Rule::All, 0};
                } else if (value.is_number_integer()) {
                    cfg.max_features = {MaxFeatures::Rule::Fixed, value.get<std::size_t>()};
                } else {
                    throw DataError("max_features must be \"sqrt\", \"all\" or a count");
                }
            } else if (key == "criterion") {
                if (value != "gini") {
                    throw DataError("only the gini criterion is supported");
                }
            } else if (key == "bootstrap") {
                cfg.bootstrap = value.get<bool>();
            } else if (key == "max_depth") {
                cfg.max_depth = value.is_null() ? std::nullopt : std::optional(value.get<std::size_t>());
            } else if (key == "min_samples_split") {
                cfg.min_samples_split = value.get<std::size_t>();
            } else if (key == "min_samples_leaf") {
                cfg.min_samples_leaf = value.get<std::size_t>();
            } else if (key == "min_impurity_split") {
                cfg.min_impurity_split = value.get<double>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "max_leaf_nodes" || key == "class_weight") {
                if (!value.is_null()) {
                    throw DataError(key + " is only supported at its default value (null)");
                }
            } else if (key == "warm_start" || key == "oob_score") {
                if (value != false) {
                    throw DataError(key + " is only supported at its default value (false)");
                }
            } else if (key == "min_weight_fraction_leaf") {
                if (value.get<double>() != 0.0) {
                    throw DataError("min_weight_fraction_leaf is only supported at its default value (0)");
                }
            } else {
                throw DataError("unknown forest config key '" + key + "'");
            }
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad forest config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const
{
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
}

std::size_t DecisionTree::depth() const
{
    std::size_t deepest = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes[i].feature >= 0) {
            stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
        }
    }
    return deepest;
}

double gini(double benign, double malicious)
{
    const double n = benign + malicious;
    if (n <= 0.0) {
        return 0.0;
    }
    const double pb = benign / n;
    const double pm = malicious / n;
    return 1.0 - pb * pb - pm * pm;
}

ForestModel train_matrix(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                         const ForestConfig& cfg, std::string schema_hash, std::size_t workers)
{
    cfg.validate();
    if (rows.empty()) {
        throw DataError("no training vectors");
    }
    if (rows.size() != labels.size()) {
        throw DataError("vector and label counts differ");
    }
    const std::size_t k = rows.front().size();
    if (k == 0) {
        throw DataError("training vectors are empty");
    }
    ColumnMatrix x{rows.size(), k, std::vector<double>(rows.size() * k)};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != k) {
            throw SchemaMismatch("training vectors have different lengths");
        }
        for (std::size_t f = 0; f < k; ++f) {
            x.data[f * x.rows + i] = rows[i][f];
        }
    }
    std::vector<std::uint8_t> y(labels.size());
    std::size_t malicious = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y[i] = labels[i] == Label::Malicious ? 1 : 0;
        malicious += y[i];
    }
    if (malicious == 0 || malicious == labels.size()) {
        throw DataError("training data must contain both classes");
    }

    ForestModel model;
    model.config = cfg;
    model.schema_hash = std::move(schema_hash);
    model.feature_count = k;
    model.trees.resize(cfg.n_estimators);

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < cfg.n_estimators; t = next++) {
            model.trees[t] = TreeBuilder(x, y, cfg, cfg.seed + t).grow();
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, cfg.n_estimators);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    return model;
}

ForestModel train(std::span<const FileVector> vectors, std::span<const Label> labels, const ForestConfig& cfg,
                  std::size_t workers)
{
    if (vectors.empty()) {
        throw DataError("no training vectors");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (v.schema_hash != vectors.front().schema_hash) {
            throw SchemaMismatch("training vectors come from different schemas");
        }
        rows.push_back(v.values);
    }
    return train_matrix(rows, labels, cfg, vectors.front().schema_hash, workers);
}

Prediction predict(const ForestModel& model, std::span<const double> values)
{
    if (values.size() != model.feature_count) {
        throw SchemaMismatch("vector has " + std::to_string(values.size()) + " features, model expects " +
                             std::to_string(model.feature_count));
    }
    std::size_t votes = 0;
    for (const auto& tree : model.trees) {
        votes += tree.votes_malicious(values) ? 1 : 0;
    }
    Prediction p;
    p.score = static_cast<double>(votes) / static_cast<double>(model.trees.size());
    p.label = p.score >= 0.5 ? Label::Malicious : Label::Benign;
    return p;
}

Prediction predict(const ForestModel& model, const FileVector& v)
{
    if (v.schema_hash != model.schema_hash) {
        throw SchemaMismatch("vector schema " + v.schema_hash + " does not match model schema " + model.schema_hash);
    }
    return predict(model, std::span<const double>(v.values));
}

Metrics metrics_from_predictions(std::span<const Label> truth, std::span<const Label> predicted)
{
    if (truth.size() != predicted.size()) {
        throw DataError("truth and prediction counts differ");
    }
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual = truth[i] == Label::Malicious;
        const bool said = predicted[i] == Label::Malicious;
        if (actual && said) {
            ++m.true_positives;
        } else if (actual) {
            ++m.false_negatives;
        } else if (said) {
            ++m.false_positives;
        } else {
            ++m.true_negatives;
        }
    }
    auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
    auto report = [&](std::size_t tp, std::size_t fp, std::size_t fn) {
        ClassReport r;
        r.precision = ratio(tp, tp + fp);
        r.recall = ratio(tp, tp + fn);
        r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
        r.support = tp + fn;
        return r;
    };
    const auto tp = m.true_positives, fp = m.false_positives, tn = m.true_negatives, fn = m.false_negatives;
    m.malicious = report(tp, fp, fn);
    m.benign = report(tn, fn, fp);
    const double total = static_cast<double>(truth.size());
    if (total > 0) {
        const double wb = static_cast<double>(m.benign.support) / total;
        const double wm = static_cast<double>(m.malicious.support) / total;
        m.weighted.precision = wb * m.benign.precision + wm * m.malicious.precision;
        m.weighted.recall = wb * m.benign.recall + wm * m.malicious.recall;
        m.weighted.f1 = wb * m.benign.f1 + wm * m.malicious.f1;
    }
    m.weighted.support = truth.size();
    m.accuracy = ratio(tp + tn, truth.size());
    m.false_positive_rate = ratio(fp, fp + tn);
    m.false_negative_rate = ratio(fn, fn + tp);
    return m;
}

Metrics evaluate(const ForestModel& model, std::span<const FileVector> vectors, std::span<const Label> labels)
{
    std::vector<Label> predicted;
    predicted.reserve(vectors.size());
    for (const auto& v : vectors) {
        predicted.push_back(predict(model, v).label);
    }
    return metrics_from_predictions(labels, predicted);
}

std::string Metrics::to_table() const
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10s\n", "Class", "Precision", "Recall", "F1-score",
                  "Support");
    os << line;
    auto row = [&](const char* name, const ClassReport& r) {
        std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10zu\n", name, percent(r.precision).c_str(),
                      percent(r.recall).c_str(), percent(r.f1).c_str(), r.support);
        os << line;
    };
    row("Benign", benign);
    row("Malware", malicious);
    row("avg/total", weighted);
    os << "False Positive Rate " << percent(false_positive_rate) << '\n';
    os << "False Negative Rate " << percent(false_negative_rate) << '\n';
    os << "Accuracy " << percent(accuracy) << '\n';
    return os.str();
}

Json Metrics::to_json() const
{
    auto cls = [](const ClassReport& r) {
        return Json{{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"support", r.support}};
    };
    return Json{
        {"benign", cls(benign)},
        {"malicious", cls(malicious)},
        {"avg_total", cls(weighted)},
        {"accuracy", accuracy},
        {"false_positive_rate", false_positive_rate},
        {"false_negative_rate", false_negative_rate},
        {"confusion",
         {{"tp", true_positives}, {"fp", false_positives}, {"tn", true_negatives}, {"fn", false_negatives}}},
    };
}

std::string save(const ForestModel& model)
{
    Json body{
        {"format", kModelFormat},
        {"version", kModelVersion},
        {"schema_hash", model.schema_hash},
        {"feature_count", model.feature_count},
        {"config", to_json(model.config)},
        {"trees", trees_to_json(model.trees)},
    };
    const std::string digest = digest_hex(body.dump());
    body["digest"] = digest;
    return body.dump();
}

ForestModel load(std::string_view bytes)
{
    Json body;
    try {
        body = Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw DataError(std::string("model file is not valid JSON (truncated?): ") + e.what());
    }
    try {
        if (!body.is_object() || body.value("format", "") != kModelFormat) {
            throw DataError("not a pmiv forest model");
        }
        if (body.at("version").get<int>() != kModelVersion) {
            throw DataError("unsupported model version " + body.at("version").dump());
        }
        const std::string digest = body.at("digest").get<std::string>();
        body.erase("digest");
        if (digest_hex(body.dump()) != digest) {
            throw DataError("model digest mismatch (corrupted file)");
        }
        ForestModel model;
        model.schema_hash = body.at("schema_hash").get<std::string>();
        model.feature_count = body.at("feature_count").get<std::size_t>();
        model.config = forest_config_from_json(body.at("config"));
        for (const auto& t : body.at("trees")) {
            const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<std::int32_t>>();
            const auto right = t.at("right").get<std::vector<std::int32_t>>();
            const auto p = t.at("p_malicious").get<std::vector<double>>();
            const std::size_t n = feature.size();
            if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || p.size() != n) {
                throw DataError("malformed tree arrays");
            }
            DecisionTree tree;
            tree.nodes.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto& node = tree.nodes[i];
                node = TreeNode{feature[i], threshold[i], left[i], right[i], p[i]};
                const bool split = node.feature >= 0;
                if (split && (static_cast<std::size_t>(node.feature) >= model.feature_count || node.left <= 0 ||
                              node.right <= 0 || static_cast<std::size_t>(node.left) >= n ||
                              static_cast<std::size_t>(node.right) >= n || node.left <= static_cast<std::int32_t>(i) ||
                              node.right <= static_cast<std::int32_t>(i))) {
                    throw DataError("tree node " + std::to_string(i) + " has invalid children or feature");
                }
                if (!(node.p_malicious >= 0.0 && node.p_malicious <= 1.0)) {
                    throw DataError("leaf probability out of range");
                }
            }
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.empty()) {
            throw DataError("model has no trees");
        }
        return model;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

} // namespace pmiv
