#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grace/errors.hpp"

namespace grace {

struct FeatureChange {
    int index = -1;
    std::string name;
    double old_value = 0.0;
    double new_value = 0.0;
    double delta = 0.0; // new - old, never 0
};

struct Predicate {
    std::vector<FeatureChange> changes;
    std::string label_x; // the model's original prediction
    std::string label_y; // the contrastive label
};

// How verbosely a change is phrased.
enum class Degree { Exact, Magnitude, Relative };

struct TextTemplate {
    enum class Style { Point, Count };
    std::string id;
    std::string pattern; // placeholders {changes}, {X}, {Y}
    Style style = Style::Point;
};

struct FeatureInfo {
    std::string display; // plain-language name
    std::string unit;    // empty means "point"
};

struct TemplateSet {
    std::vector<TextTemplate> templates;
    std::map<std::string, FeatureInfo> features;
};

struct ExplanationText {
    std::string template_id;
    std::vector<Degree> degrees; // one per change
    std::string text;
};

// Changes at every index where the two raw vectors differ exactly, listed
// in `ranked_order` where given, ascending index otherwise.
Predicate extract_predicate(const Eigen::VectorXd& x_raw,
                            const Eigen::VectorXd& x_tilde_raw,
                            const std::vector<std::string>& names,
                            const std::string& label_x, const std::string& label_y,
                            const std::vector<int>& ranked_order = {});

// infl_lambda(P) = 1(flipped) / |P|^lambda.
double influence_score(const Predicate& predicate, bool flipped, double lambda);

// `degrees` may be empty (all exact), a single entry (broadcast), or one
// entry per change.
ExplanationText render_text(const Predicate& predicate, const TextTemplate& tmpl,
                            const std::vector<Degree>& degrees, const TemplateSet& vocab);

TemplateSet builtin_templates();

// JSON file with a "templates" array and an optional "features" map; the
// result replaces the builtins entirely.
TemplateSet load_templates(const std::string& path);

const TextTemplate& choose_template(const TemplateSet& set, std::uint64_t seed);
const TextTemplate& find_template(const TemplateSet& set, const std::string& id);

Degree parse_degree(const std::string& name);

// Up to 3 decimals, trailing zeros trimmed ("9", "0.245").
std::string format_number(double value);

} // namespace grace
