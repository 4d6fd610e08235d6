#include "ctsac/curriculum.hpp"

#include <stdexcept>
#include <string>

#include "ctsac/common.hpp"

namespace ctsac::curr {

void CurriculumConfig::validate() const {
    if (max_stage < 1 || max_stage > 6) {
        throw ConfigError("curriculum.max_stage must lie in 1..6, got " +
                          std::to_string(max_stage));
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ConfigError("curriculum.beta must lie in (0, 1), got " +
                          std::to_string(beta));
    }
    if (window == 0) throw ConfigError("curriculum.window must be positive");
    if (fixed_stage > 6) {
        throw ConfigError("curriculum.fixed_stage must lie in 0..6, got " +
                          std::to_string(fixed_stage));
    }
}

std::vector<double> stage_probabilities(std::size_t j) {
    if (j < 1) throw std::out_of_range("stage index must be at least 1");
    double total = 0.0;
    for (std::size_t k = 1; k <= j; ++k) total += static_cast<double>(k * k);
    std::vector<double> p(j);
    for (std::size_t i = 1; i <= j; ++i) {
        p[i - 1] = static_cast<double>(i * i) / total;
    }
    return p;
}

CurriculumScheduler::CurriculumScheduler(const CurriculumConfig& config,
                                         std::uint64_t seed)
    : config_(config), rng_(seed) {
    config_.validate();
}

double CurriculumScheduler::trailing_rate() const {
    if (window_.empty()) return 0.0;
    std::size_t hits = 0;
    for (bool s : window_) hits += s ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(window_.size());
}

std::size_t CurriculumScheduler::sample_stage() {
    if (config_.fixed_stage > 0) return config_.fixed_stage;
    const std::vector<double> p = stage_probabilities(stage_);
    const double u = rng_.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i + 1;
    }
    return p.size();
}

bool CurriculumScheduler::record_episode(bool success) {
    window_.push_back(success);
    if (window_.size() > config_.window) window_.pop_front();
    ++n_e_;
    if (config_.fixed_stage > 0) return false;
    if (window_.size() == config_.window && trailing_rate() > config_.beta &&
        stage_ < config_.max_stage) {
        ++stage_;
        window_.clear();
        n_e_ = 0;
        return true;
    }
    return false;
}

void CurriculumScheduler::restore(std::size_t stage, std::size_t n_e,
                                  const std::vector<bool>& window) {
    if (stage < 1 || stage > config_.max_stage) {
        throw ConfigError("restore: stage " + std::to_string(stage) +
                          " outside 1.." + std::to_string(config_.max_stage));
    }
    stage_ = stage;
    n_e_ = n_e;
    window_.assign(window.begin(), window.end());
    while (window_.size() > config_.window) window_.pop_front();
}

std::vector<bool> CurriculumScheduler::window_contents() const {
    return std::vector<bool>(window_.begin(), window_.end());
}

}  // namespace ctsac::curr
