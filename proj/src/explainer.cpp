#include "grace/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace grace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

FeatureInfo lookup(const TemplateSet& vocab, const std::string& name) {
    auto it = vocab.features.find(name);
    FeatureInfo info;
    info.display = (it != vocab.features.end() && !it->second.display.empty())
                       ? it->second.display
                       : name;
    info.unit = (it != vocab.features.end() && !it->second.unit.empty()) ? it->second.unit
                                                                         : "point";
    return info;
}

// Word for a ratio new/old when it is (nearly) one the vocabulary covers.
const char* magnitude_word(double old_value, double new_value) {
    if (old_value == 0.0) return nullptr;
    const double ratio = new_value / old_value;
    const std::pair<double, const char*> vocabulary[] = {
        {0.5, "half"}, {2.0, "twice"}, {3.0, "three times"}};
    for (const auto& [target, word] : vocabulary)
        if (std::abs(ratio - target) <= 1e-6) return word;
    return nullptr;
}

std::string render_change(const FeatureChange& change, Degree degree,
                          TextTemplate::Style style, const TemplateSet& vocab) {
    const FeatureInfo info = lookup(vocab, change.name);
    const bool up = change.delta > 0.0;

    if (degree == Degree::Magnitude) {
        const char* word = magnitude_word(change.old_value, change.new_value);
        if (word == nullptr)
            degree = Degree::Exact;
        else if (style == TextTemplate::Style::Count)
            return std::string(word) + " as many " + info.display;
        else
            return info.display + " been " + word + " as much";
    }
    if (degree == Degree::Relative) {
        if (style == TextTemplate::Style::Count)
            return std::string(up ? "more " : "fewer ") + info.display;
        return info.display + (up ? " been higher" : " been lower");
    }
    const std::string amount = format_number(std::abs(change.delta));
    if (style == TextTemplate::Style::Count)
        return amount + (up ? " more " : " fewer ") + info.display;
    return info.display + " been " + amount + " " + info.unit + (up ? " higher" : " lower");
}

std::string join_changes(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
        out += parts[i];
    }
    return out;
}

void replace_all(std::string& text, const std::string& key, const std::string& value) {
    for (std::size_t pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
}

} // namespace

Predicate extract_predicate(const Eigen::VectorXd& x_raw,
                            const Eigen::VectorXd& x_tilde_raw,
                            const std::vector<std::string>& names,
                            const std::string& label_x, const std::string& label_y,
                            const std::vector<int>& ranked_order) {
    if (x_raw.size() != x_tilde_raw.size())
        throw ShapeError("extract_predicate: vector length mismatch");
    if (static_cast<std::size_t>(x_raw.size()) != names.size())
        throw ShapeError("extract_predicate: name count mismatch");

    std::vector<int> order;
    std::vector<bool> listed(names.size(), false);
    for (int j : ranked_order) {
        if (j < 0 || static_cast<std::size_t>(j) >= names.size())
            throw std::invalid_argument("extract_predicate: ranked index out of range");
        if (!listed[static_cast<std::size_t>(j)]) order.push_back(j);
        listed[static_cast<std::size_t>(j)] = true;
    }
    for (int j = 0; j < static_cast<int>(names.size()); ++j)
        if (!listed[static_cast<std::size_t>(j)]) order.push_back(j);

    Predicate p;
    p.label_x = label_x;
    p.label_y = label_y;
    for (int j : order) {
        if (x_raw(j) == x_tilde_raw(j)) continue;
        FeatureChange change;
        change.index = j;
        change.name = names[static_cast<std::size_t>(j)];
        change.old_value = x_raw(j);
        change.new_value = x_tilde_raw(j);
        change.delta = change.new_value - change.old_value;
        p.changes.push_back(std::move(change));
    }
    return p;
}

double influence_score(const Predicate& predicate, bool flipped, double lambda) {
    if (!flipped) return 0.0;
    if (predicate.changes.empty())
        throw std::invalid_argument("influence_score: flipped with an empty predicate");
    return 1.0 / std::pow(static_cast<double>(predicate.changes.size()), lambda);
}

ExplanationText render_text(const Predicate& predicate, const TextTemplate& tmpl,
                            const std::vector<Degree>& degrees, const TemplateSet& vocab) {
    if (predicate.changes.empty())
        throw std::invalid_argument("render_text: nothing to explain (empty predicate)");
    if (degrees.size() > 1 && degrees.size() != predicate.changes.size())
        throw std::invalid_argument("render_text: one degree per change expected");

    ExplanationText out;
    out.template_id = tmpl.id;
    for (std::size_t i = 0; i < predicate.changes.size(); ++i) {
        if (degrees.empty())
            out.degrees.push_back(Degree::Exact);
        else
            out.degrees.push_back(degrees.size() == 1 ? degrees[0] : degrees[i]);
    }

    std::vector<std::string> parts;
    for (std::size_t i = 0; i < predicate.changes.size(); ++i)
        parts.push_back(render_change(predicate.changes[i], out.degrees[i], tmpl.style, vocab));

    out.text = tmpl.pattern;
    replace_all(out.text, "{changes}", join_changes(parts));
    replace_all(out.text, "{X}", predicate.label_x);
    replace_all(out.text, "{Y}", predicate.label_y);
    return out;
}

TemplateSet builtin_templates() {
    TemplateSet set;
    set.templates = {
        {"had_been", "had {changes}, it would have been classified as {Y} RATHER THAN {X}",
         TextTemplate::Style::Point},
        {"because", "it is classified as {X} RATHER THAN {Y} because {changes}",
         TextTemplate::Style::Point},
        {"if_there_were",
         "if there were {changes}, the patient would be classified as {Y} RATHER THAN {X}",
         TextTemplate::Style::Count},
    };
    return set;
}

TemplateSet load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open template file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("template file '" + path + "' is not valid JSON: " + e.what());
    }

    TemplateSet set;
    if (!doc.contains("templates") || !doc.at("templates").is_array() ||
        doc.at("templates").empty())
        throw DataError("template file '" + path + "' needs a non-empty 'templates' array");
    for (const auto& t : doc.at("templates")) {
        TextTemplate tmpl;
        tmpl.id = t.at("id").get<std::string>();
        tmpl.pattern = t.at("pattern").get<std::string>();
        const std::string style = t.value("style", "point");
        if (style == "point")
            tmpl.style = TextTemplate::Style::Point;
        else if (style == "count")
            tmpl.style = TextTemplate::Style::Count;
        else
            throw DataError("template '" + tmpl.id + "' has unknown style '" + style + "'");
        set.templates.push_back(std::move(tmpl));
    }
    if (doc.contains("features")) {
        for (const auto& [name, info] : doc.at("features").items()) {
            FeatureInfo fi;
            fi.display = info.value("display", "");
            fi.unit = info.value("unit", "");
            set.features[name] = std::move(fi);
        }
    }
    return set;
}

const TextTemplate& choose_template(const TemplateSet& set, std::uint64_t seed) {
    if (set.templates.empty()) throw ConfigError("template set is empty");
    return set.templates[splitmix64(seed) % set.templates.size()];
}

const TextTemplate& find_template(const TemplateSet& set, const std::string& id) {
    for (const auto& t : set.templates)
        if (t.id == id) return t;
    throw ConfigError("unknown template id '" + id + "'");
}

Degree parse_degree(const std::string& name) {
    if (name == "exact") return Degree::Exact;
    if (name == "magnitude") return Degree::Magnitude;
    if (name == "relative") return Degree::Relative;
    throw ConfigError("unknown obscurity degree '" + name + "'");
}

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

} // namespace grace
