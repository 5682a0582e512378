// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/eval/report.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mmseg::eval {

using i64 = std::int64_t;

void EvalReport::recompute() {
    mean_dsc = {};
    mean_hd95 = {};
    grand_mean = 0;
    if (scores.empty()) return;
    for (const auto& row : scores)
        for (int r = 0; r < 3; ++r) {
            mean_dsc[static_cast<std::size_t>(r)] += row[static_cast<std::size_t>(r)].dsc;
            mean_hd95[static_cast<std::size_t>(r)] += row[static_cast<std::size_t>(r)].hd95;
        }
    const double n = static_cast<double>(scores.size());
    for (int r = 0; r < 3; ++r) {
        mean_dsc[static_cast<std::size_t>(r)] /= n;
        mean_hd95[static_cast<std::size_t>(r)] /= n;
        grand_mean += mean_dsc[static_cast<std::size_t>(r)];
    }
    grand_mean /= 3.0;
}

bool EvalReport::operator==(const EvalReport& o) const {
    if (codes != o.codes || subjects != o.subjects || scores.size() != o.scores.size()) return false;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t r = 0; r < 3; ++r)
            if (scores[i][r].dsc != o.scores[i][r].dsc || scores[i][r].hd95 != o.scores[i][r].hd95) return false;
    return mean_dsc == o.mean_dsc && mean_hd95 == o.mean_hd95 && grand_mean == o.grand_mean;
}

EvalReport evaluate_sweep(hyper::HyperSegModel<float>& model, const std::vector<train::Sample>& subjects,
                          const hyper::PromptBank& bank, const EvalOptions& opt) {
    if (subjects.empty()) throw std::invalid_argument("evaluate_sweep: no subjects");
    const int m = model.backbone().in_channels;
    const auto& h = model.hyper_config();
    const bool needs_text = h.enabled && h.indicator == hyper::Indicator::Clip;

    std::vector<train::Prepared> prepared;
    for (const auto& s : subjects) prepared.push_back(train::prepare(s, opt.crop, false, 0));

    EvalReport rep;
    rep.codes = sweep_codes(m);
    rep.subjects = static_cast<int>(subjects.size());
    for (const auto& code : rep.codes) {
        // Resolve the embedding before any forward so a missing row fails fast.
        const auto* text = needs_text ? &bank.get(code) : nullptr;
        std::array<RegionScore, 3> acc{};
        for (std::size_t k = 0; k < prepared.size(); ++k) {
            auto x = prepared[k].x;
            const i64 n = x.numel() / x.channels();
            for (int c = 0; c < m; ++c)
                if (!code[c]) std::fill(x.channel(c), x.channel(c) + n, 0.0f);
            const auto out = model.forward(x, code, text);
            const auto& gt = prepared[k].masks.regions;
            const auto e = gt.extent();
            std::vector<std::uint8_t> pred(static_cast<std::size_t>(n));
            for (int r = 0; r < 3; ++r) {
                const float* lg = out.logits.channel(r);
                for (i64 i = 0; i < n; ++i)
                    pred[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-static_cast<double>(lg[i]))) > opt.threshold;
                const std::uint8_t* g = gt.channel(r);
                acc[static_cast<std::size_t>(r)].dsc += dsc(pred.data(), g, n);
                if (opt.with_hd95)
                    acc[static_cast<std::size_t>(r)].hd95 +=
                        hd95(pred.data(), g, e, subjects[k].volume.spacing, opt.hd);
            }
        }
        for (auto& a : acc) {
            a.dsc /= static_cast<double>(prepared.size());
            a.hd95 /= static_cast<double>(prepared.size());
        }
        rep.scores.push_back(acc);
    }
    rep.recompute();
    return rep;
}

Format format_from_path(const std::string& path) {
    auto ends = [&](const char* s) {
        const std::string suf(s);
        return path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends(".csv")) return Format::Csv;
    if (ends(".json")) return Format::Json;
    if (ends(".md")) return Format::Markdown;
    throw std::invalid_argument("report path must end in .csv, .json or .md: " + path);
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["subjects"] = r.subjects;
    j["modalities"] = r.codes.empty() ? std::vector<std::string>{} : r.codes.front().names();
    j["combinations"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.codes.size(); ++i) {
        nlohmann::json row;
        row["code"] = r.codes[i].str();
        for (std::size_t k = 0; k < 3; ++k)
            row[kRegionNames[k]] = {{"dsc", r.scores[i][k].dsc}, {"hd95", r.scores[i][k].hd95}};
        j["combinations"].push_back(row);
    }
    for (std::size_t k = 0; k < 3; ++k)
        j["mean"][kRegionNames[k]] = {{"dsc", r.mean_dsc[k]}, {"hd95", r.mean_hd95[k]}};
    j["grand_mean"] = r.grand_mean;
    return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.subjects = j.at("subjects").get<int>();
    const auto names = j.at("modalities").get<std::vector<std::string>>();
    for (const auto& row : j.at("combinations")) {
        auto code = ModalityCode::parse(row.at("code").get<std::string>());
        r.codes.emplace_back(code.bits(), names);
        std::array<RegionScore, 3> s{};
        for (std::size_t k = 0; k < 3; ++k)
            s[k] = {row.at(kRegionNames[k]).at("dsc").get<double>(), row.at(kRegionNames[k]).at("hd95").get<double>()};
        r.scores.push_back(s);
    }
    r.recompute();
    return r;
}

namespace {

std::string fmt(double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string render_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "metric,region";
    for (const auto& c : r.codes) os << ',' << c.str();
    os << ",Mean\n";
    for (const char* metric : {"DSC", "HD95"}) {
        const bool is_dsc = metric[0] == 'D';
        for (std::size_t k = 0; k < 3; ++k) {
            os << metric << ',' << kRegionNames[k];
            for (const auto& row : r.scores) os << ',' << fmt(is_dsc ? row[k].dsc : row[k].hd95, 6);
            os << ',' << fmt(is_dsc ? r.mean_dsc[k] : r.mean_hd95[k], 6) << '\n';
        }
    }
    return os.str();
}

std::string render_md(const EvalReport& r) {
    std::ostringstream os;
    const auto names = r.codes.empty() ? std::vector<std::string>{} : r.codes.front().names();
    os << "| |";
    for (std::size_t i = 0; i < r.codes.size(); ++i) os << " |";
    os << " Mean |\n|---|";
    for (std::size_t i = 0; i < r.codes.size(); ++i) os << "---|";
    os << "---|\n";
    for (std::size_t m = 0; m < names.size(); ++m) {
        os << "| " << names[m] << " |";
        for (const auto& c : r.codes) os << ' ' << (c[static_cast<int>(m)] ? "●" : "○") << " |";
        os << " |\n";
    }
    for (const char* metric : {"DSC (%)", "HD95 (mm)"}) {
        const bool is_dsc = metric[0] == 'D';
        for (std::size_t k = 0; k < 3; ++k) {
            os << "| " << kRegionNames[k] << ' ' << metric << " |";
            for (const auto& row : r.scores) os << ' ' << fmt(is_dsc ? 100 * row[k].dsc : row[k].hd95, 2) << " |";
            os << ' ' << fmt(is_dsc ? 100 * r.mean_dsc[k] : r.mean_hd95[k], 2) << " |\n";
        }
    }
    os << "\nGrand mean DSC: " << fmt(100 * r.grand_mean, 2) << "% over " << r.subjects << " subjects\n";
    return os.str();
}

}  // namespace

std::string render_report(const EvalReport& r, Format f) {
    switch (f) {
        case Format::Csv: return render_csv(r);
        case Format::Json: return report_to_json(r).dump(2) + "\n";
        case Format::Markdown: return render_md(r);
    }
    return {};
}

}  // namespace mmseg::eval
