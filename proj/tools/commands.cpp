#include "commands.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace dpexpr::cli {

namespace {

class UsageFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr int model_format_version = 1;

std::string fmt_machine(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

std::string fmt_human(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4g", x);
    return buffer;
}

std::string fmt_percent(double fraction) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.1f%%", 100 * fraction);
    return buffer;
}

std::pair<std::size_t, std::size_t> parse_line_window(const std::string& text) {
    auto comma = text.find(',');
    try {
        if (comma == std::string::npos) {
            throw std::invalid_argument(text);
        }
        std::size_t first = std::stoul(text.substr(0, comma)), last = std::stoul(text.substr(comma + 1));
        if (first == 0 || last < first) {
            throw std::invalid_argument(text);
        }
        return { first, last };
    } catch (const std::exception&) {
        throw UsageFailure("--line-window expects 'A,B' with 1 <= A <= B, got '" + text + "'");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    }
    out << content;
}

ParseOptions parse_options(const RunManifest& manifest) {
    ParseOptions opts;
    opts.drop_incomplete_probes = manifest.drop_incomplete_probes;
    opts.line_window = manifest.line_window;
    return opts;
}

SoftDataset load_input(const RunManifest& manifest, std::ostream& err) {
    if (manifest.input.empty()) {
        throw UsageFailure("--input is required");
    }
    auto ds = load_dataset(manifest.input, parse_options(manifest));
    if (ds.dropped_rows > 0) {
        err << "dropped " << ds.dropped_rows << " probes with missing values\n";
    }
    return ds;
}

ExpressionMatrix load_matrix(const RunManifest& manifest, std::ostream& err) {
    auto ds = load_input(manifest, err);
    GroupAssignment groups;
    if (!manifest.case_subsets.empty() || !manifest.control_subsets.empty()) {
        if (manifest.case_subsets.empty() || manifest.control_subsets.empty()) {
            throw UsageFailure("--case-subset and --control-subset must be given together");
        }
        groups = groups_from_subsets(ds, manifest.case_subsets, manifest.control_subsets);
    } else if (!manifest.groups.empty()) {
        groups = parse_group_sidecar(read_text_file(manifest.groups));
    } else {
        throw UsageFailure("no group mapping: give --case-subset/--control-subset or --groups");
    }
    return to_matrix(ds, groups);
}

DPConfig dp_config(const RunManifest& manifest) {
    DPConfig config;
    config.weak_prior = manifest.weak_prior;
    if (!manifest.weak_prior) {
        if (manifest.base.empty()) {
            throw UsageFailure("--base is required when a concentration is given");
        }
        if (!(manifest.c >= 0) || !(manifest.d >= 0)) {
            throw UsageFailure("concentrations must be nonnegative");
        }
        config.c = manifest.c;
        config.d = manifest.d;
        config.f0 = parse_base(manifest.base);
        config.g0 = manifest.control_base.empty() ? config.f0 : parse_base(manifest.control_base);
    }
    return config;
}

RankOptions rank_options(const RunManifest& manifest) {
    RankOptions opts;
    opts.num_threads = manifest.threads;
    opts.quadrature.tolerance = manifest.quadrature_tolerance;
    opts.quadrature.max_evaluations = manifest.quadrature_max_evaluations;
    return opts;
}

CrossValOptions cv_options(const RunManifest& manifest) {
    CrossValOptions opts;
    opts.mode = manifest.refit_panel ? CvMode::RefitPanel : CvMode::OracleFaithful;
    opts.rank = rank_options(manifest);
    opts.num_threads = manifest.threads;
    return opts;
}

std::size_t require_k(std::size_t k, const char* flag) {
    if (k == 0) {
        throw UsageFailure(std::string(flag) + " is required and must be positive");
    }
    return k;
}

const char* prior_label(const RunManifest& manifest) {
    return manifest.weak_prior ? "weak prior" : "Dirichlet-process prior";
}

void emit(const RunManifest& manifest, const std::string& text, std::ostream& out) {
    if (manifest.out.empty()) {
        out << text;
    } else {
        write_file(manifest.out, text);
    }
}

/*** Commands ***/

std::string report_rank(const RunManifest& manifest, std::ostream& err) {
    auto mat = load_matrix(manifest, err);
    auto ranking = rank_probes(mat, dp_config(manifest), rank_options(manifest));
    const auto p = mat.num_probes();

    if (manifest.format == "json") {
        nlohmann::json doc;
        doc["command"] = "rank";
        doc["m"] = mat.num_cases();
        doc["n"] = mat.num_controls();
        doc["weak_prior"] = manifest.weak_prior;
        auto& probes = doc["probes"] = nlohmann::json::array();
        for (std::size_t r = 0; r < p; ++r) {
            auto j = ranking.order[r];
            probes.push_back({ { "probe_id", mat.probe_ids[j] }, { "identifier", mat.probe_identifiers[j] }, { "q", ranking.q[j] }, { "rank", r + 1 } });
        }
        return doc.dump(2) + "\n";
    }

    if (manifest.format == "tsv") {
        std::string text = "probe_id\tidentifier\tq\trank\n";
        for (std::size_t r = 0; r < p; ++r) {
            auto j = ranking.order[r];
            text += mat.probe_ids[j] + "\t" + mat.probe_identifiers[j] + "\t" + fmt_machine(ranking.q[j]) + "\t" + std::to_string(r + 1) + "\n";
        }
        return text;
    }

    std::ostringstream text;
    text << "Ranked " << p << " probes (" << mat.num_cases() << " cases, " << mat.num_controls() << " controls, " << prior_label(manifest) << ")\n\n";
    text << "rank\tprobe_id\tidentifier\tq\n";
    constexpr std::size_t shown = 10;
    for (std::size_t r = 0; r < p; ++r) {
        if (p > 2 * shown && r == shown) {
            text << "...\t(" << (p - 2 * shown) << " probes omitted; use --format tsv for the full table)\n";
            r = p - shown;
        }
        auto j = ranking.order[r];
        text << (r + 1) << "\t" << mat.probe_ids[j] << "\t" << mat.probe_identifiers[j] << "\t" << fmt_human(ranking.q[j]) << "\n";
    }
    return text.str();
}

std::string report_panel(const RunManifest& manifest, std::ostream& err) {
    auto mat = load_matrix(manifest, err);
    auto ranking = rank_probes(mat, dp_config(manifest), rank_options(manifest));
    auto panel = select_panel(ranking, require_k(manifest.k, "--k"));

    if (manifest.format == "json") {
        nlohmann::json doc;
        doc["command"] = "panel";
        doc["k"] = panel.k;
        auto entries = [&](const std::vector<std::size_t>& idx) {
            auto arr = nlohmann::json::array();
            for (auto j : idx) {
                arr.push_back({ { "index", j }, { "probe_id", mat.probe_ids[j] }, { "identifier", mat.probe_identifiers[j] }, { "q", ranking.q[j] } });
            }
            return arr;
        };
        doc["down"] = entries(panel.down);
        doc["up"] = entries(panel.up);
        return doc.dump(2) + "\n";
    }

    if (manifest.format == "tsv") {
        std::string text = "pair\tdirection\tprobe_id\tidentifier\tq\n";
        for (std::size_t i = 0; i < panel.k; ++i) {
            for (auto [dir, j] : { std::pair{ "down", panel.down[i] }, std::pair{ "up", panel.up[i] } }) {
                text += std::to_string(i + 1) + "\t" + dir + "\t" + mat.probe_ids[j] + "\t" + mat.probe_identifiers[j] + "\t" + fmt_machine(ranking.q[j]) + "\n";
            }
        }
        return text;
    }

    std::ostringstream text;
    text << "Selecting k = " << panel.k << " pairs of down / up regulated gene probes.\n\n";
    text << "Down regulated\tq\tUp regulated\tq\n";
    for (std::size_t i = 0; i < panel.k; ++i) {
        auto d = panel.down[i], u = panel.up[i];
        text << mat.probe_identifiers[d] << " (" << mat.probe_ids[d] << ")\t" << fmt_human(ranking.q[d]) << "\t"
             << mat.probe_identifiers[u] << " (" << mat.probe_ids[u] << ")\t" << fmt_human(ranking.q[u]) << "\n";
    }
    return text.str();
}

std::string report_fit(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
    auto mat = load_matrix(manifest, err);
    auto ranking = rank_probes(mat, dp_config(manifest), rank_options(manifest));
    auto panel = select_panel(ranking, require_k(manifest.k, "--k"));
    auto model = fit(mat, panel);
    auto doc = model_to_json(model, mat, manifest_hash(manifest));

    if (manifest.format == "human") {
        std::ostringstream text;
        text << "Fitted classifier with k = " << panel.k << " (" << model.m << " cases, " << model.n << " controls)\n";
        text << "Critical t = " << fmt_human(model.t_star) << "\n";
        if (manifest.out.empty()) {
            return text.str();
        }
        out << text.str();
    }
    return doc.dump(2) + "\n";
}

std::string report_classify(const RunManifest& manifest, std::ostream& err) {
    if (manifest.model.empty()) {
        throw UsageFailure("--model is required");
    }
    auto stored = model_from_json(nlohmann::json::parse(read_file(manifest.model)));
    auto ds = load_input(manifest, err);

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < ds.rows.size(); ++r) {
        row_of.emplace(ds.rows[r].id_ref, r);
    }
    auto lookup = [&](const std::string& id) {
        auto it = row_of.find(id);
        if (it == row_of.end()) {
            throw Error(ErrorCode::UnknownProbeId, "panel probe '" + id + "' is missing from '" + manifest.input + "'");
        }
        return it->second;
    };

    const auto& panel = stored.model.panel;
    std::size_t width = 0;
    for (std::size_t i = 0; i < panel.k; ++i) {
        width = std::max({ width, panel.up[i] + 1, panel.down[i] + 1 });
    }

    const auto samples = ds.sample_ids();
    std::vector<double> t_values(samples.size());
    std::vector<Label> labels(samples.size());
    std::vector<double> individual(width, 1.0);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (std::size_t i = 0; i < panel.k; ++i) {
            individual[panel.down[i]] = ds.rows[lookup(stored.down_probe_ids[i])].values[s];
            individual[panel.up[i]] = ds.rows[lookup(stored.up_probe_ids[i])].values[s];
        }
        try {
            t_values[s] = t_statistic(panel, individual);
        } catch (const Error& e) {
            throw Error(e.code(), "sample '" + samples[s] + "': " + e.what());
        }
        labels[s] = classify(stored.model, individual);
    }

    if (manifest.format == "json") {
        nlohmann::json doc;
        doc["command"] = "classify";
        doc["t_star"] = stored.model.t_star;
        auto& arr = doc["individuals"] = nlohmann::json::array();
        for (std::size_t s = 0; s < samples.size(); ++s) {
            arr.push_back({ { "sample_id", samples[s] }, { "t", t_values[s] }, { "label", to_string(labels[s]) } });
        }
        return doc.dump(2) + "\n";
    }

    if (manifest.format == "tsv") {
        std::string text = "sample_id\tt\tlabel\n";
        for (std::size_t s = 0; s < samples.size(); ++s) {
            text += samples[s] + "\t" + fmt_machine(t_values[s]) + "\t" + to_string(labels[s]) + "\n";
        }
        return text;
    }

    std::ostringstream text;
    text << "Critical t = " << fmt_human(stored.model.t_star) << "\n\n";
    text << "sample_id\tT\tlabel\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
        text << samples[s] << "\t" << fmt_human(t_values[s]) << "\t" << to_string(labels[s]) << "\n";
    }
    return text.str();
}

nlohmann::json confusion_json(const ConfusionTable& t) {
    return {
        { "case_unhealthy", t.case_unhealthy },
        { "case_healthy", t.case_healthy },
        { "control_unhealthy", t.control_unhealthy },
        { "control_healthy", t.control_healthy },
        { "sensitivity", t.sensitivity() },
        { "specificity", t.specificity() }
    };
}

std::string report_cv(const RunManifest& manifest, std::ostream& err) {
    auto mat = load_matrix(manifest, err);
    auto k = require_k(manifest.k, "--k");
    auto table = loocv(mat, k, dp_config(manifest), cv_options(manifest));
    const char* mode = manifest.refit_panel ? "refit-panel" : "oracle-faithful";

    if (manifest.format == "json") {
        nlohmann::json doc = confusion_json(table);
        doc["command"] = "cv";
        doc["k"] = k;
        doc["mode"] = mode;
        return doc.dump(2) + "\n";
    }

    if (manifest.format == "tsv") {
        std::string text = "group\tunhealthy\thealthy\tunhealthy_fraction\thealthy_fraction\n";
        text += "case\t" + std::to_string(table.case_unhealthy) + "\t" + std::to_string(table.case_healthy) + "\t" + fmt_machine(table.sensitivity()) + "\t" + fmt_machine(table.false_negative_rate()) + "\n";
        text += "control\t" + std::to_string(table.control_unhealthy) + "\t" + std::to_string(table.control_healthy) + "\t" + fmt_machine(table.false_positive_rate()) + "\t" + fmt_machine(table.specificity()) + "\n";
        return text;
    }

    std::ostringstream text;
    text << "Cross validated sensitivity and specificity (k = " << k << ", " << mode << ").\n\n";
    text << "-----------------------------\n";
    text << "         Unhealthy | Healthy\n";
    text << "-------------------+---------\n";
    char line[128];
    std::snprintf(line, sizeof(line), "    Case   %7s | %7s\n", fmt_percent(table.sensitivity()).c_str(), fmt_percent(table.false_negative_rate()).c_str());
    text << line;
    std::snprintf(line, sizeof(line), " Control   %7s | %7s\n", fmt_percent(table.false_positive_rate()).c_str(), fmt_percent(table.specificity()).c_str());
    text << line;
    text << "-----------------------------\n";
    return text.str();
}

std::string report_select_k(const RunManifest& manifest, std::ostream& err) {
    auto mat = load_matrix(manifest, err);
    auto report = select_k(mat, require_k(manifest.k_max, "--k-max"), dp_config(manifest), cv_options(manifest));

    if (manifest.format == "json") {
        nlohmann::json doc;
        doc["command"] = "select-k";
        doc["chosen_k"] = report.chosen_k;
        auto& arr = doc["per_k"] = nlohmann::json::array();
        for (const auto& e : report.per_k) {
            auto entry = confusion_json(e.table);
            entry["k"] = e.k;
            entry["balance"] = e.balance;
            entry["total_error"] = e.total_error;
            arr.push_back(entry);
        }
        return doc.dump(2) + "\n";
    }

    if (manifest.format == "tsv") {
        std::string text = "k\tcase_unhealthy\tcase_healthy\tcontrol_unhealthy\tcontrol_healthy\tsensitivity\tspecificity\tbalance\ttotal_error\tchosen\n";
        for (const auto& e : report.per_k) {
            const auto& t = e.table;
            text += std::to_string(e.k) + "\t" + std::to_string(t.case_unhealthy) + "\t" + std::to_string(t.case_healthy) + "\t" + std::to_string(t.control_unhealthy) + "\t" + std::to_string(t.control_healthy) + "\t" +
                fmt_machine(t.sensitivity()) + "\t" + fmt_machine(t.specificity()) + "\t" + fmt_machine(e.balance) + "\t" + fmt_machine(e.total_error) + "\t" + (e.k == report.chosen_k ? "1" : "0") + "\n";
        }
        return text;
    }

    std::ostringstream text;
    text << "k\tsensitivity\tspecificity\t|FNR-FPR|\tFNR+FPR\n";
    for (const auto& e : report.per_k) {
        text << e.k << "\t" << fmt_percent(e.table.sensitivity()) << "\t" << fmt_percent(e.table.specificity()) << "\t" << fmt_human(e.balance) << "\t" << fmt_human(e.total_error) << (e.k == report.chosen_k ? "\t<- chosen" : "") << "\n";
    }
    text << "\nChosen k = " << report.chosen_k << "\n";
    return text.str();
}

std::string find_manifest_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest" && i + 1 < args.size()) {
            return args[i + 1];
        }
        if (args[i].starts_with("--manifest=")) {
            return args[i].substr(11);
        }
    }
    return {};
}

}

nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json doc;
    doc["command"] = m.command;
    doc["input"] = m.input;
    doc["groups"] = m.groups;
    doc["case_subsets"] = m.case_subsets;
    doc["control_subsets"] = m.control_subsets;
    doc["weak_prior"] = m.weak_prior;
    doc["c"] = m.c;
    doc["d"] = m.d;
    doc["base"] = m.base;
    doc["control_base"] = m.control_base;
    doc["k"] = m.k;
    doc["k_max"] = m.k_max;
    doc["refit_panel"] = m.refit_panel;
    if (m.line_window) {
        doc["line_window"] = { m.line_window->first, m.line_window->second };
    } else {
        doc["line_window"] = nullptr;
    }
    doc["drop_incomplete_probes"] = m.drop_incomplete_probes;
    doc["quadrature_tolerance"] = m.quadrature_tolerance;
    doc["quadrature_max_evaluations"] = m.quadrature_max_evaluations;
    doc["model"] = m.model;
    doc["seed"] = m.seed;
    doc["format"] = m.format;
    doc["out"] = m.out;
    doc["threads"] = m.threads;
    return doc;
}

RunManifest manifest_from_json(const nlohmann::json& doc) {
    RunManifest m;
    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key) && !doc[key].is_null()) {
            doc[key].get_to(field);
        }
    };
    get("command", m.command);
    get("input", m.input);
    get("groups", m.groups);
    get("case_subsets", m.case_subsets);
    get("control_subsets", m.control_subsets);
    get("weak_prior", m.weak_prior);
    get("c", m.c);
    get("d", m.d);
    get("base", m.base);
    get("control_base", m.control_base);
    get("k", m.k);
    get("k_max", m.k_max);
    get("refit_panel", m.refit_panel);
    if (doc.contains("line_window") && doc["line_window"].is_array()) {
        m.line_window = std::make_pair(doc["line_window"][0].get<std::size_t>(), doc["line_window"][1].get<std::size_t>());
    }
    get("drop_incomplete_probes", m.drop_incomplete_probes);
    get("quadrature_tolerance", m.quadrature_tolerance);
    get("quadrature_max_evaluations", m.quadrature_max_evaluations);
    get("model", m.model);
    get("seed", m.seed);
    get("format", m.format);
    get("out", m.out);
    get("threads", m.threads);
    return m;
}

std::string manifest_hash(const RunManifest& manifest) {
    auto doc = manifest_to_json(manifest);
    doc.erase("threads");
    doc.erase("format");
    doc.erase("out");
    auto text = doc.dump();

    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

nlohmann::json model_to_json(const ClassifierModel& model, const ExpressionMatrix& mat, const std::string& hash) {
    nlohmann::json doc;
    doc["format"] = "dpexpr-classifier";
    doc["version"] = model_format_version;
    doc["k"] = model.panel.k;
    doc["num_probes"] = mat.num_probes();
    doc["m"] = model.m;
    doc["n"] = model.n;
    auto entries = [&](const std::vector<std::size_t>& idx) {
        auto arr = nlohmann::json::array();
        for (auto j : idx) {
            arr.push_back({ { "index", j }, { "probe_id", mat.probe_ids[j] }, { "identifier", mat.probe_identifiers[j] } });
        }
        return arr;
    };
    doc["down"] = entries(model.panel.down);
    doc["up"] = entries(model.panel.up);
    doc["t_star"] = model.t_star;
    doc["training_t"] = model.training_t;
    doc["manifest_hash"] = hash;
    return doc;
}

StoredModel model_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "dpexpr-classifier") {
        throw Error(ErrorCode::UnparseableValue, "not a dpexpr classifier model");
    }
    if (doc.value("version", 0) != model_format_version) {
        throw Error(ErrorCode::UnparseableValue, "unsupported model version " + std::to_string(doc.value("version", 0)));
    }
    StoredModel out;
    auto& model = out.model;
    model.panel.k = doc.at("k").get<std::size_t>();
    for (const auto& e : doc.at("down")) {
        model.panel.down.push_back(e.at("index").get<std::size_t>());
        out.down_probe_ids.push_back(e.at("probe_id").get<std::string>());
    }
    for (const auto& e : doc.at("up")) {
        model.panel.up.push_back(e.at("index").get<std::size_t>());
        out.up_probe_ids.push_back(e.at("probe_id").get<std::string>());
    }
    if (model.panel.down.size() != model.panel.k || model.panel.up.size() != model.panel.k) {
        throw Error(ErrorCode::UnparseableValue, "model panel does not have k entries per direction");
    }
    model.t_star = doc.at("t_star").get<double>();
    model.training_t = doc.at("training_t").get<std::vector<double>>();
    model.m = doc.at("m").get<std::size_t>();
    model.n = doc.at("n").get<std::size_t>();
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    std::string save_manifest;

    try {
        auto manifest_path = find_manifest_path(args);
        if (!manifest_path.empty()) {
            manifest = manifest_from_json(nlohmann::json::parse(read_file(manifest_path)));
        }
    } catch (const std::exception& e) {
        err << "error: cannot load manifest: " << e.what() << "\n";
        return InputError;
    }

    CLI::App app{ "Dirichlet-process predictive analysis of two-group expression data", "dp-expr" };
    app.require_subcommand(1);

    std::string line_window, manifest_path;
    bool weak_flag = false, oracle_flag = false, refit_flag = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--manifest", manifest_path, "Load run settings from a JSON manifest; explicit flags override it");
        sub->add_option("--save-manifest", save_manifest, "Write the effective run settings as a JSON manifest");
        sub->add_option("--input", manifest.input, "SOFT (optionally gzipped) or TSV expression file");
        sub->add_option("--format", manifest.format, "Output format")->check(CLI::IsMember({ "human", "tsv", "json" }));
        sub->add_option("--out", manifest.out, "Write output to this file instead of standard output");
        sub->add_option("--threads", manifest.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--line-window", line_window, "Read table rows from physical lines A..B only");
        sub->add_flag("--drop-incomplete-probes", manifest.drop_incomplete_probes, "Drop probes with missing values instead of failing");
    };
    auto add_grouping = [&](CLI::App* sub) {
        sub->add_option("--groups", manifest.groups, "Sidecar file of 'sample_id<TAB>case|control' lines");
        sub->add_option("--case-subset", manifest.case_subsets, "SOFT subset description(s) or id(s) forming the case group")->delimiter(',');
        sub->add_option("--control-subset", manifest.control_subsets, "SOFT subset description(s) or id(s) forming the control group")->delimiter(',');
    };
    auto add_prior = [&](CLI::App* sub) {
        sub->add_flag("--weak-prior", weak_flag, "Take the zero-concentration limit (default)");
        sub->add_option("--concentration-c", manifest.c, "Concentration of the case Dirichlet process");
        sub->add_option("--concentration-d", manifest.d, "Concentration of the control Dirichlet process");
        sub->add_option("--base", manifest.base, "Base distribution: normal:mu,sigma | uniform:a,b | lognormal:mu,sigma");
        sub->add_option("--control-base", manifest.control_base, "Base distribution of the control process, if different from --base");
        sub->add_option("--quadrature-tol", manifest.quadrature_tolerance, "Absolute tolerance of the base-overlap integral");
        sub->add_option("--quadrature-max-evals", manifest.quadrature_max_evaluations, "Evaluation budget of the base-overlap integral");
        sub->add_option("--seed", manifest.seed, "Random seed (recorded in the manifest)");
    };
    auto add_cv_mode = [&](CLI::App* sub) {
        auto* oracle = sub->add_flag("--oracle-faithful", oracle_flag, "Rank once on all data; recompute only the threshold per fold (default)");
        auto* refit = sub->add_flag("--refit-panel", refit_flag, "Recompute the ranking and panel inside every fold");
        oracle->excludes(refit);
    };

    auto* rank = app.add_subcommand("rank", "Rank probes by posterior predictive probability");
    auto* panel = app.add_subcommand("panel", "Select the k-pair signature panel");
    auto* fit_cmd = app.add_subcommand("fit", "Fit the classifier and serialize it as JSON");
    auto* classify_cmd = app.add_subcommand("classify", "Classify new individuals with a fitted model");
    auto* cv = app.add_subcommand("cv", "Leave-one-out cross-validation for a given k");
    auto* select = app.add_subcommand("select-k", "Choose k by leave-one-out cross-validation");

    for (auto* sub : { rank, panel, fit_cmd, cv, select }) {
        add_common(sub);
        add_grouping(sub);
        add_prior(sub);
    }
    add_common(classify_cmd);
    for (auto* sub : { panel, fit_cmd, cv }) {
        sub->add_option("-k,--k", manifest.k, "Number of down / up probe pairs");
    }
    select->add_option("--k-max", manifest.k_max, "Largest k to evaluate");
    add_cv_mode(cv);
    add_cv_mode(select);
    classify_cmd->add_option("--model", manifest.model, "Model JSON written by 'fit'");

    std::vector<const char*> argv{ "dp-expr" };
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? Success : UsageError;
    }

    try {
        auto* active = app.get_subcommands().front();
        manifest.command = active->get_name();

        if (!line_window.empty()) {
            manifest.line_window = parse_line_window(line_window);
        }
        bool concentration_given = active->get_option_no_throw("--concentration-c") && (active->count("--concentration-c") + active->count("--concentration-d") > 0);
        if (concentration_given && weak_flag) {
            throw UsageFailure("--weak-prior cannot be combined with --concentration-c/--concentration-d");
        }
        if (concentration_given) {
            manifest.weak_prior = false;
        } else if (weak_flag) {
            manifest.weak_prior = true;
        }
        if (refit_flag) {
            manifest.refit_panel = true;
        } else if (oracle_flag) {
            manifest.refit_panel = false;
        }

        if (!save_manifest.empty()) {
            write_file(save_manifest, manifest_to_json(manifest).dump(2) + "\n");
        }

        std::string text;
        if (manifest.command == "rank") {
            text = report_rank(manifest, err);
        } else if (manifest.command == "panel") {
            text = report_panel(manifest, err);
        } else if (manifest.command == "fit") {
            text = report_fit(manifest, out, err);
        } else if (manifest.command == "classify") {
            text = report_classify(manifest, err);
        } else if (manifest.command == "cv") {
            text = report_cv(manifest, err);
        } else {
            text = report_select_k(manifest, err);
        }
        emit(manifest, text, out);
        return Success;

    } catch (const UsageFailure& e) {
        err << "usage error: " << e.what() << "\n";
        return UsageError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return is_numerical(e.code()) ? NumericalError : InputError;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return InputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return InputError;
    }
}

}
