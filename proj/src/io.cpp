#include "pndkit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

namespace pndkit::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(path.string() + ": bad number '" + s + "'");
    }
}

std::uint64_t parse_uint(const std::string& s, const std::filesystem::path& path) {
    std::uint64_t v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && *first == ' ') ++first;
    const auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
        throw std::invalid_argument(path.string() + ": bad count '" + s + "'");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path.string());
    return in;
}

std::string next_line(std::ifstream& in) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return line;
    }
    return {};
}

} // namespace

std::string format_double(double x) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

void write_click_table(const std::filesystem::path& path, const ClickTable& table) {
    auto out = open_out(path);
    out << "eta,trials,c00,c01,c10,c11\n";
    for (const ClickRow& row : table.rows)
        out << format_double(row.eta) << ',' << row.trials << ',' << row.c00 << ','
            << row.c01 << ',' << row.c10 << ',' << row.c11 << '\n';
}

ClickTable read_click_table(const std::filesystem::path& path) {
    auto in = open_in(path);
    const std::string header = next_line(in);
    if (header != "eta,trials,c00,c01,c10,c11")
        throw std::invalid_argument(path.string() + ": unexpected click-table header");
    ClickTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 6)
            throw std::invalid_argument(path.string() + ": expected 6 columns");
        ClickRow row;
        row.eta = parse_double(fields[0], path);
        row.trials = parse_uint(fields[1], path);
        row.c00 = parse_uint(fields[2], path);
        row.c01 = parse_uint(fields[3], path);
        row.c10 = parse_uint(fields[4], path);
        row.c11 = parse_uint(fields[5], path);
        table.rows.push_back(row);
    }
    table.validate();
    return table;
}

void write_pnd(const std::filesystem::path& path, const Pnd& pnd) {
    auto out = open_out(path);
    out << "n,prob\n";
    for (std::size_t n = 0; n < pnd.dim(); ++n)
        out << n << ',' << format_double(pnd[n]) << '\n';
}

Pnd read_pnd(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_line(in) != "n,prob")
        throw std::invalid_argument(path.string() + ": unexpected PND header");
    std::vector<std::pair<std::size_t, double>> entries;
    std::size_t max_n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 2)
            throw std::invalid_argument(path.string() + ": expected 2 columns");
        const std::size_t n = parse_uint(fields[0], path);
        entries.emplace_back(n, parse_double(fields[1], path));
        max_n = std::max(max_n, n);
    }
    if (entries.empty()) throw std::invalid_argument(path.string() + ": empty PND");
    std::vector<double> probs(max_n + 1, 0.0);
    for (const auto& [n, p] : entries) probs[n] = p;
    return Pnd(std::move(probs));
}

void write_joint_pnd(const std::filesystem::path& path, const JointPnd& pnd) {
    auto out = open_out(path);
    out << "n,k,prob\n";
    for (std::size_t n = 0; n <= pnd.trunc(); ++n)
        for (std::size_t k = 0; k <= pnd.trunc(); ++k)
            out << n << ',' << k << ',' << format_double(pnd.at(n, k)) << '\n';
}

JointPnd read_joint_pnd(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_line(in) != "n,k,prob")
        throw std::invalid_argument(path.string() + ": unexpected joint PND header");
    struct Entry {
        std::size_t n, k;
        double p;
    };
    std::vector<Entry> entries;
    std::size_t max_n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 3)
            throw std::invalid_argument(path.string() + ": expected 3 columns");
        Entry e;
        e.n = parse_uint(fields[0], path);
        e.k = parse_uint(fields[1], path);
        e.p = parse_double(fields[2], path);
        max_n = std::max({max_n, e.n, e.k});
        entries.push_back(e);
    }
    if (entries.empty()) throw std::invalid_argument(path.string() + ": empty PND");
    const std::size_t d = max_n + 1;
    std::vector<double> w(d * d, 0.0);
    for (const Entry& e : entries) w[e.n * d + e.k] = e.p;
    return JointPnd(max_n, std::move(w));
}

void write_trajectories(const std::filesystem::path& path, const TrajectoryRecord& record) {
    auto out = open_out(path);
    out << "traj_id,n_s_clicks,n_i_clicks\n";
    for (std::size_t i = 0; i < record.counts.size(); ++i)
        out << i << ',' << record.counts[i].first << ',' << record.counts[i].second
            << '\n';
}

TrajectoryRecord read_trajectories(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_line(in) != "traj_id,n_s_clicks,n_i_clicks")
        throw std::invalid_argument(path.string() + ": unexpected trajectory header");
    TrajectoryRecord record;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 3)
            throw std::invalid_argument(path.string() + ": expected 3 columns");
        record.counts.emplace_back(std::uint32_t(parse_uint(fields[1], path)),
                                   std::uint32_t(parse_uint(fields[2], path)));
    }
    if (record.counts.empty())
        throw std::invalid_argument(path.string() + ": empty trajectory record");
    return record;
}

json diagnostics_json(const EmDiagnostics& diag, const EmConfig& config) {
    json j;
    j["iterations"] = diag.iterations;
    j["final_epsilon"] = diag.final_epsilon;
    j["converged"] = diag.converged;
    j["mass_outside_reliable_window"] = diag.mass_outside_reliable_window;
    j["config"] = {{"trunc", config.trunc},
                   {"rel_tol", config.rel_tol},
                   {"max_iters", config.max_iters},
                   {"plane_scale", config.plane_scale}};
    j["epsilon_history"] = diag.epsilon_history;
    return j;
}

json metrics_json(const JointPnd& pnd, const SourceModelFit& fit) {
    const Moments mom = joint_moments(pnd);
    const NrfReport nrf = noise_reduction(pnd);
    json j;
    j["mean_s"] = mom.mean_s;
    j["mean_i"] = mom.mean_i;
    j["v_diff"] = nrf.v_diff;
    j["n_tot"] = nrf.n_tot;
    j["nrf"] = nrf.nrf;
    j["nrf_db"] = nrf.nrf_db;
    j["mandel_q_s"] = mandel_q(marginal(pnd, Arm::signal));
    j["mandel_q_i"] = mandel_q(marginal(pnd, Arm::idler));
    j["fit"] = {{"r", fit.r},
                {"n_th_s", fit.n_th_s},
                {"n_th_i", fit.n_th_i},
                {"fidelity", fit.fidelity}};
    return j;
}

json params_json(const ResonatorParams& res, const PulseParams& pulse) {
    json j;
    j["gamma_tot_p"] = res.gamma_tot_p;
    j["gamma_tot_s"] = res.gamma_tot_s;
    j["gamma_tot_i"] = res.gamma_tot_i;
    j["eta_es"] = res.eta_es;
    j["eta_ei"] = res.eta_ei;
    j["tau_rt"] = res.tau_rt;
    j["lambda_bar"] = res.lambda_bar;
    j["lambda"] = res.lambda_cl;
    if (res.gamma_ep > 0.0) j["gamma_ep"] = res.gamma_ep;
    j["pulse"] = {{"power_mw", pulse.power_mw},
                  {"rep_rate", pulse.rep_rate},
                  {"duration", pulse.duration},
                  {"detuning", pulse.detuning},
                  {"pump_freq", pulse.pump_freq}};
    if (pulse.pump_coupling >= 0.0) j["pulse"]["pump_coupling"] = pulse.pump_coupling;
    return j;
}

void parse_params(const json& j, ResonatorParams& res, PulseParams& pulse) {
    static const char* known[] = {"gamma_tot_p", "gamma_tot_s", "gamma_tot_i",
                                  "eta_es",      "eta_ei",      "tau_rt",
                                  "n_g",         "lambda_bar",  "lambda",
                                  "gamma_ep",    "pulse"};
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            throw std::invalid_argument("unknown parameter field: " + key);
        (void)value;
    }
    if (j.contains("gamma_tot_p")) res.gamma_tot_p = j["gamma_tot_p"].get<double>();
    if (j.contains("gamma_tot_s")) res.gamma_tot_s = j["gamma_tot_s"].get<double>();
    if (j.contains("gamma_tot_i")) res.gamma_tot_i = j["gamma_tot_i"].get<double>();
    if (j.contains("eta_es")) res.eta_es = j["eta_es"].get<double>();
    if (j.contains("eta_ei")) res.eta_ei = j["eta_ei"].get<double>();
    if (j.contains("tau_rt")) res.tau_rt = j["tau_rt"].get<double>();
    if (j.contains("lambda_bar")) res.lambda_bar = j["lambda_bar"].get<double>();
    if (j.contains("lambda")) res.lambda_cl = j["lambda"].get<double>();
    if (j.contains("gamma_ep")) res.gamma_ep = j["gamma_ep"].get<double>();
    if (j.contains("pulse")) {
        const json& p = j["pulse"];
        static const char* pknown[] = {"power_mw", "rep_rate",  "duration",
                                       "detuning", "pump_freq", "pump_coupling"};
        for (const auto& [key, value] : p.items()) {
            if (std::find_if(std::begin(pknown), std::end(pknown),
                             [&](const char* k) { return key == k; }) == std::end(pknown))
                throw std::invalid_argument("unknown pulse field: " + key);
            (void)value;
        }
        if (p.contains("power_mw")) pulse.power_mw = p["power_mw"].get<double>();
        if (p.contains("rep_rate")) pulse.rep_rate = p["rep_rate"].get<double>();
        if (p.contains("duration")) pulse.duration = p["duration"].get<double>();
        if (p.contains("detuning")) pulse.detuning = p["detuning"].get<double>();
        if (p.contains("pump_freq")) pulse.pump_freq = p["pump_freq"].get<double>();
        if (p.contains("pump_coupling"))
            pulse.pump_coupling = p["pump_coupling"].get<double>();
    }
    res.validate();
    pulse.validate();
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

} // namespace pndkit::io
