#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "qvtv/data_io.hpp"
#include "qvtv/sampler.hpp"

namespace qvtv {

/// One row per kept draw: beta (equation-major), strict lower A^{-1}, then
/// the regime's volatility quantities per series.
inline std::string draws_to_csv(const PosteriorDraws& dr, const std::vector<std::string>& names) {
    std::vector<std::string> header{"draw"};
    std::vector<const Mat*> blocks;
    const int k = dr.k;
    for (int j = 0; j < dr.n; ++j)
        for (int l = 0; l < k; ++l) {
            std::string reg;
            if (dr.intercept && l == 0) reg = "const";
            else {
                const int idx = l - (dr.intercept ? 1 : 0);
                reg = names[static_cast<std::size_t>(idx % dr.n)] + "_L" + std::to_string(idx / dr.n + 1);
            }
            header.push_back("beta_" + names[static_cast<std::size_t>(j)] + "_" + reg);
        }
    for (int i = 1; i < dr.n; ++i)
        for (int j = 0; j < i; ++j) header.push_back("abar_" + std::to_string(i) + "_" + std::to_string(j));
    blocks.push_back(&dr.beta);
    blocks.push_back(&dr.a_free);
    const std::pair<const char*, const Mat*> vols[] = {
        {"delta2", &dr.delta2}, {"phi", &dr.phi},     {"sigma2_h", &dr.sigma2_h}, {"mu", &dr.mu},
        {"h_last", &dr.h_last}, {"omega", &dr.omega}, {"alpha", &dr.alpha},       {"gamma", &dr.gamma},
        {"sigma2_next", &dr.sigma2_next}};
    for (const auto& [label, m] : vols) {
        if (m->cols() == 0 || m->rows() == 0) continue;
        for (int j = 0; j < dr.n; ++j) header.push_back(std::string(label) + "_" + names[static_cast<std::size_t>(j)]);
        blocks.push_back(m);
    }
    std::ostringstream os;
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
    for (int d = 0; d < dr.size(); ++d) {
        os << d;
        for (const Mat* m : blocks)
            for (Eigen::Index c = 0; c < m->cols(); ++c) os << ',' << format_double((*m)(d, c));
        os << '\n';
    }
    return os.str();
}

inline std::string acceptance_to_csv(const std::string& model_id, const PosteriorDraws& dr) {
    std::ostringstream os;
    os << "model_id,block,rate_burnin,rate_kept\n";
    for (const auto& [block, t] : dr.acceptance)
        os << model_id << ',' << block << ',' << fmt_double_opt(t.rate_burnin()) << ',' << fmt_double_opt(t.rate_kept())
           << '\n';
    return os.str();
}

/// Posterior mean variance path with the design's dates.
inline std::string vol_path_to_csv(const PosteriorDraws& dr, const std::vector<std::string>& dates,
                                   const std::vector<std::string>& names) {
    std::ostringstream os;
    os << "date";
    for (const auto& n : names) os << ",H_" << n << ",logH_" << n;
    os << '\n';
    const Eigen::Index T = dr.vol_path_mean.rows();
    const std::size_t off = dates.size() - static_cast<std::size_t>(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        os << dates[off + static_cast<std::size_t>(t)];
        for (int j = 0; j < dr.n; ++j)
            os << ',' << format_double(dr.vol_path_mean(t, j)) << ',' << format_double(dr.log_vol_path_mean(t, j));
        os << '\n';
    }
    return os.str();
}

}  // namespace qvtv
