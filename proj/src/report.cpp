#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "volcascade/error.hpp"
#include "volcascade/pipeline.hpp"

namespace volcascade {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string opt(const std::optional<OmoriFit>& f, double OmoriFit::*field) {
    return f ? num((*f).*field) : std::string{};
}

class TableWriter {
public:
    TableWriter(fs::path dir, std::vector<std::string>& written) : dir_(std::move(dir)), written_(written) {}

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir_ / name).string());
        out << content;
        if (!out) throw InputError("failed writing " + (dir_ / name).string());
        written_.push_back(name);
    }

private:
    fs::path dir_;
    std::vector<std::string>& written_;
};

std::string plot_omori_hist(const std::vector<ShockLawRow>& rows) {
    constexpr double lo = -1.0, width = 0.1;
    constexpr int bins = 25;
    std::vector<std::size_t> before(bins, 0), after(bins, 0);
    std::size_t out_b = 0, out_a = 0;
    auto place = [&](const std::optional<OmoriFit>& f, std::vector<std::size_t>& counts, std::size_t& outside) {
        if (!f) return;
        const auto i = static_cast<long>(std::floor((f->omega - lo) / width));
        if (i < 0 || i >= bins)
            ++outside;
        else
            ++counts[static_cast<std::size_t>(i)];
    };
    for (const auto& r : rows) {
        place(r.before, before, out_b);
        place(r.after, after, out_a);
    }
    std::ostringstream os;
    os << "bin_lo,bin_hi,count_before,count_after\n";
    for (int i = 0; i < bins; ++i)
        os << num(lo + width * i) << ',' << num(lo + width * (i + 1)) << ',' << before[static_cast<std::size_t>(i)]
           << ',' << after[static_cast<std::size_t>(i)] << '\n';
    os << "outside,," << out_b << ',' << out_a << '\n';
    return os.str();
}

std::string plot_market_vs_stock(const PipelineOutputs& out) {
    struct Acc {
        double sum[4] = {0, 0, 0, 0};
        std::size_t n[4] = {0, 0, 0, 0};
    };
    std::map<std::string, Acc> per_day;
    for (const auto& r : out.stock_rows) {
        auto& a = per_day[r.date];
        if (r.before) {
            a.sum[0] += r.before->omega;
            a.sum[2] += r.before->alpha;
            ++a.n[0];
            ++a.n[2];
        }
        if (r.after) {
            a.sum[1] += r.after->omega;
            a.sum[3] += r.after->alpha;
            ++a.n[1];
            ++a.n[3];
        }
    }
    std::ostringstream os;
    os << "date,omega_b_market,omega_a_market,alpha_b_market,alpha_a_market,"
          "omega_b_stock_mean,omega_a_stock_mean,alpha_b_stock_mean,alpha_a_stock_mean,stocks\n";
    for (const auto& r : out.market_rows) {
        os << r.date << ',' << opt(r.before, &OmoriFit::omega) << ',' << opt(r.after, &OmoriFit::omega) << ','
           << opt(r.before, &OmoriFit::alpha) << ',' << opt(r.after, &OmoriFit::alpha);
        const auto it = per_day.find(r.date);
        std::size_t stocks = 0;
        for (int p = 0; p < 4; ++p) {
            os << ',';
            if (it != per_day.end() && it->second.n[p] > 0)
                os << num(it->second.sum[p] / static_cast<double>(it->second.n[p]));
        }
        if (it != per_day.end()) stocks = std::max(it->second.n[0], it->second.n[1]);
        os << ',' << stocks << '\n';
    }
    return os.str();
}

std::string plot_params_vs_magnitude(const EnsembleLaws& e) {
    std::ostringstream os;
    os << "side,M_lo,M_hi,rows,mean_omega,mean_alpha\n";
    const std::pair<const char*, const CrossoverScan*> scans[] = {
        {"before", &e.crossover_b}, {"after", &e.crossover_a}, {"pooled", &e.crossover}};
    for (const auto& [side, scan] : scans)
        for (const auto& b : scan->bins)
            os << side << ',' << num(b.lo) << ',' << num(b.hi) << ',' << b.count << ','
               << (b.count ? num(b.mean_omega) : std::string{}) << ',' << (b.count ? num(b.mean_alpha) : std::string{})
               << '\n';
    return os.str();
}

std::string plot_productivity(const PipelineOutputs& out) {
    std::ostringstream os;
    os << "scope,date,symbol,M,P_b,P_a\n";
    for (const auto& r : out.market_rows)
        os << "market," << r.date << ",," << num(r.M) << ',' << num(r.P_b) << ',' << num(r.P_a) << '\n';
    for (const auto& r : out.stock_rows)
        os << "stock," << r.date << ',' << r.symbol << ',' << num(r.M) << ',' << num(r.P_b) << ',' << num(r.P_a)
           << '\n';
    return os.str();
}

std::string plot_before_after(const PipelineOutputs& out) {
    std::ostringstream os;
    os << "horizon,date,omega_b,omega_a,alpha_b,alpha_a,P_b,P_a\n";
    for (const auto* rows : {&out.market_rows, &out.market_rows_alt})
        for (const auto& r : *rows)
            os << r.horizon << ',' << r.date << ',' << opt(r.before, &OmoriFit::omega) << ','
               << opt(r.after, &OmoriFit::omega) << ',' << opt(r.before, &OmoriFit::alpha) << ','
               << opt(r.after, &OmoriFit::alpha) << ',' << num(r.P_b) << ',' << num(r.P_a) << '\n';
    return os.str();
}

std::string plot_bath_scatter(const std::vector<ShockLawRow>& rows) {
    std::ostringstream os;
    os << "date,V1,V2b,V2a\n";
    for (const auto& r : rows) os << r.date << ',' << num(r.V1) << ',' << num(r.V2_b) << ',' << num(r.V2_a) << '\n';
    return os.str();
}

std::string plot_bath_binned(const EnsembleLaws& e) {
    std::ostringstream os;
    os << "side,bin,V1_mean,V2_mean,V2_std,count\n";
    const std::pair<const char*, const std::optional<BinnedBath>*> sides[] = {{"before", &e.stock_bath_b},
                                                                              {"after", &e.stock_bath_a}};
    for (const auto& [side, fit] : sides) {
        if (!*fit) continue;
        for (std::size_t i = 0; i < (*fit)->bins.size(); ++i) {
            const auto& b = (*fit)->bins[i];
            os << side << ',' << i << ',' << num(b.v1_mean) << ',' << num(b.v2_mean) << ',' << num(b.v2_std) << ','
               << b.count << '\n';
        }
    }
    return os.str();
}

std::string plot_activity(const std::vector<ActivityBucket>& buckets) {
    std::ostringstream os;
    os << "omega_lo,omega_hi,omega_mean,stocks,rows,alpha_b,alpha_a,omega_b,omega_a,P_b,P_a,V1,V2b,V2a\n";
    for (const auto& b : buckets)
        os << num(b.omega_lo) << ',' << num(b.omega_hi) << ',' << num(b.omega_mean) << ',' << b.stocks << ','
           << b.rows << ',' << num(b.alpha_b) << ',' << num(b.alpha_a) << ',' << num(b.omega_b) << ','
           << num(b.omega_a) << ',' << num(b.P_b) << ',' << num(b.P_a) << ',' << num(b.v1) << ',' << num(b.v2_b)
           << ',' << num(b.v2_a) << '\n';
    return os.str();
}

}  // namespace

std::string default_fixture_path() { return std::string(VOLCASCADE_DATA_DIR) + "/table1_fomc.csv"; }

std::vector<FixtureRow> read_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open fixture " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("date,unscheduled,rate_new,rate_change,relative_change,reported_t,published_t_c", 0) != 0)
        throw InputError(path + ": unexpected fixture header");
    std::vector<FixtureRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[7];
        for (auto& field : f) std::getline(ls, field, ',');
        try {
            FixtureRow r;
            r.date = f[0];
            r.unscheduled = f[1] == "1";
            r.rate_new = std::stod(f[2]);
            r.rate_change = std::stod(f[3]);
            r.relative_change = std::stod(f[4]);
            r.reported_t = std::stoi(f[5]);
            r.published_t_c = std::stoi(f[6]);
            rows.push_back(r);
        } catch (const std::exception&) {
            throw InputError(path + " line " + std::to_string(lineno) + ": malformed fixture row");
        }
    }
    return rows;
}

std::vector<std::string> report(const PipelineOutputs& out, const PipelineConfig& config, const fs::path& out_dir,
                                const std::string& fixture_path) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw InputError("cannot create output directory " + out_dir.string());
    std::vector<std::string> written;
    TableWriter w(out_dir, written);
    std::vector<std::string> notices = out.notes;

    if (out.pdf_x && out.pdf_x_sh) {
        std::ostringstream os;
        os << "bin,center,pdf_x,pdf_x_sh\n";
        for (std::size_t i = 0; i < out.pdf_x->bins(); ++i)
            os << i << ',' << num(out.pdf_x->center(i)) << ',' << num(out.pdf_x->density[i]) << ','
               << num(out.pdf_x_sh->density[i]) << '\n';
        w.write("plot_comovement_pdf.csv", os.str());
    }
    w.write("plot_omori_hist.csv", plot_omori_hist(out.market_rows));
    w.write("plot_market_vs_stock.csv", plot_market_vs_stock(out));
    w.write("plot_params_vs_magnitude.csv", plot_params_vs_magnitude(out.ensemble));
    w.write("plot_productivity.csv", plot_productivity(out));
    w.write("plot_before_after.csv", plot_before_after(out));
    w.write("plot_bath_scatter.csv", plot_bath_scatter(out.market_rows));
    w.write("plot_bath_binned.csv", plot_bath_binned(out.ensemble));
    if (out.ensemble.activity)
        w.write("plot_activity.csv", plot_activity(*out.ensemble.activity));
    else
        notices.push_back("activity profile " + out.ensemble.activity_status);

    // Announcement-time comparison, only for dates present in the input.
    std::map<std::string, const ShockRecord*> by_date;
    for (const auto& s : out.detection.shocks) by_date[s.date] = &s;
    std::vector<FixtureRow> fixture;
    if (!fixture_path.empty() && fs::exists(fixture_path)) fixture = read_fixture(fixture_path);
    std::ostringstream cmp;
    cmp << "date,reported_t,published_t_c,detected_t_c,accepted,delta_vs_reported,delta_vs_published\n";
    std::size_t matched = 0;
    for (const auto& f : fixture) {
        const auto it = by_date.find(f.date);
        if (it == by_date.end()) continue;
        ++matched;
        const ShockRecord& s = *it->second;
        cmp << f.date << ',' << f.reported_t << ',' << f.published_t_c << ',';
        if (s.t_c >= 0)
            cmp << s.t_c << ',' << (s.accepted ? 1 : 0) << ',' << s.t_c - f.reported_t << ','
                << s.t_c - f.published_t_c;
        else
            cmp << ",0,,";
        cmp << '\n';
    }
    if (matched > 0)
        w.write("fixture_comparison.csv", cmp.str());
    else
        notices.push_back("fixture comparison skipped: no announcement dates present in the input");

    std::ostringstream notes;
    notes << "x_c = " << num(out.x_c_used) << " (q = " << num(config.q) << ", dt = " << config.horizon << ")\n";
    for (const auto& n : notices) notes << n << '\n';
    w.write("report_notes.txt", notes.str());
    return written;
}

}  // namespace volcascade
