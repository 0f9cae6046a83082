#include "graphmem/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace graphmem {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const json& a) {
    Vec v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

[[noreturn]] void parse_fail(size_t line_no, const std::string& what) {
    throw std::runtime_error("dataset parse error at record " + std::to_string(line_no) +
                             ": " + what);
}

}  // namespace

std::string dataset_to_string(const Dataset& ds) {
    std::ostringstream out;
    json header = {{"record", "header"},
                   {"format_version", ds.header.format_version},
                   {"d_raw", ds.header.d_raw},
                   {"action_type_names", ds.header.action_type_names}};
    out << header.dump() << "\n";
    for (const Episode& ep : ds.episodes) {
        for (const Observation& o : ep.observations) {
            json rec = {{"record", "obs"},     {"task_id", ep.task_id},
                        {"t", o.t},            {"action_type", o.action_type},
                        {"v", vec_to_json(o.v)}, {"x", vec_to_json(o.x)},
                        {"k", vec_to_json(o.k)}};
            out << rec.dump() << "\n";
        }
        json rec = {{"record", "episode"},
                    {"task_id", ep.task_id},
                    {"reward", ep.reward},
                    {"expert_states", std::vector<int>(ep.expert_states.begin(),
                                                       ep.expert_states.end())},
                    {"length", static_cast<int>(ep.observations.size())}};
        out << rec.dump() << "\n";
    }
    return out.str();
}

Dataset dataset_from_string(const std::string& text) {
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    bool have_header = false;
    std::vector<Observation> pending;
    std::string pending_task;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            parse_fail(line_no, e.what());
        }
        if (!rec.contains("record")) parse_fail(line_no, "missing record type");
        const std::string kind = rec["record"].get<std::string>();
        if (kind == "header") {
            const int version = rec.at("format_version").get<int>();
            if (version != kDatasetFormatVersion)
                throw std::runtime_error("dataset format_version " + std::to_string(version) +
                                         " not supported (expected " +
                                         std::to_string(kDatasetFormatVersion) + ")");
            ds.header.format_version = version;
            ds.header.d_raw = rec.at("d_raw").get<int>();
            ds.header.action_type_names =
                rec.at("action_type_names").get<std::vector<std::string>>();
            have_header = true;
        } else if (kind == "obs") {
            if (!have_header) parse_fail(line_no, "observation before header");
            Observation o;
            o.t = rec.at("t").get<int>();
            o.action_type = rec.at("action_type").get<int>();
            o.v = vec_from_json(rec.at("v"));
            o.x = vec_from_json(rec.at("x"));
            o.k = vec_from_json(rec.at("k"));
            const std::string task = rec.at("task_id").get<std::string>();
            if (!pending.empty() && task != pending_task)
                parse_fail(line_no, "interleaved episodes");
            pending_task = task;
            pending.push_back(std::move(o));
        } else if (kind == "episode") {
            if (!have_header) parse_fail(line_no, "episode before header");
            Episode ep;
            ep.task_id = rec.at("task_id").get<std::string>();
            if (!pending.empty() && ep.task_id != pending_task)
                parse_fail(line_no, "episode record does not match observations");
            ep.reward = rec.at("reward").get<int>();
            for (int s : rec.at("expert_states").get<std::vector<int>>())
                ep.expert_states.insert(s);
            ep.observations = std::move(pending);
            pending.clear();
            const int declared = rec.at("length").get<int>();
            if (declared != static_cast<int>(ep.observations.size()))
                parse_fail(line_no, "episode length mismatch");
            ds.episodes.push_back(std::move(ep));
        } else {
            parse_fail(line_no, "unknown record type '" + kind + "'");
        }
    }
    if (!have_header) throw std::runtime_error("dataset has no header record");
    if (!pending.empty())
        throw std::runtime_error("dataset ends with unterminated episode");
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << dataset_to_string(ds);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return dataset_from_string(buf.str());
}

}  // namespace graphmem
