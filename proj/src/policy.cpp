#include "teleop/policy.hpp"

#include "teleop/errors.hpp"
#include "teleop/json_util.hpp"

#include <cmath>
#include <fstream>

namespace teleop {

void PolicyConfig::validate() const {
    if (chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
    if (!(ridge_lambda >= 0) || !std::isfinite(ridge_lambda)) throw ConfigError("ridge_lambda must be >= 0");
    if (obs_history_len < 1) throw ConfigError("obs_history_len must be >= 1");
    if (!(ensemble_m >= 0)) throw ConfigError("ensemble_m must be >= 0");
    if (!(feature_clip > 0)) throw ConfigError("feature_clip must be positive");
}

Eigen::VectorXd raw_features(const std::vector<Observation>& history, std::size_t t, const PolicyConfig& cfg) {
    const long n = history.at(t).q.size();
    const long per = cfg.include_force ? 2 * n : n;
    Eigen::VectorXd x(per * cfg.obs_history_len);
    for (int h = 0; h < cfg.obs_history_len; ++h) {
        const std::size_t i = t >= static_cast<std::size_t>(h) ? t - h : 0;
        const Observation& o = history[i];
        require_dim(o.q.size(), n, "observation q");
        x.segment(h * per, n) = o.q;
        if (cfg.include_force) {
            require_dim(o.tau_ext.size(), n, "observation tau_ext");
            x.segment(h * per + n, n) = o.tau_ext;
        }
    }
    return x;
}

TrainingSet build_dataset(const std::vector<const DemonstrationRecord*>& records, const PolicyConfig& cfg) {
    cfg.validate();
    if (records.empty()) throw std::invalid_argument("build_dataset: no records");
    const int n = records.front()->meta.dof;
    const int k = cfg.chunk_size;
    std::size_t rows = 0;
    for (const auto* r : records) {
        if (r->meta.dof != n) throw DimensionError("build_dataset: records disagree on dof");
        if (static_cast<int>(r->steps.size()) < k)
            throw std::invalid_argument("build_dataset: record shorter than the chunk size (" +
                                        std::to_string(r->steps.size()) + " < " + std::to_string(k) + ")");
        rows += r->steps.size();
    }
    const long in_dim = (cfg.include_force ? 2 * n : n) * cfg.obs_history_len;
    TrainingSet ts;
    ts.dof = n;
    ts.features.resize(static_cast<long>(rows), in_dim);
    ts.targets.resize(static_cast<long>(rows), static_cast<long>(k) * n);
    long row = 0;
    for (const auto* r : records) {
        std::vector<Observation> obs;
        obs.reserve(r->steps.size());
        for (const auto& s : r->steps) obs.push_back({s.q_follower, s.tau_ext});
        const std::size_t L = r->steps.size();
        for (std::size_t t = 0; t < L; ++t, ++row) {
            ts.features.row(row) = raw_features(obs, t, cfg).transpose();
            for (int j = 0; j < k; ++j) {
                const std::size_t idx = std::min(t + static_cast<std::size_t>(j), L - 1);
                ts.targets.row(row).segment(static_cast<long>(j) * n, n) = r->steps[idx].action.transpose();
            }
        }
    }
    ts.mean = ts.features.colwise().mean().transpose();
    ts.scale.resize(in_dim);
    for (long c = 0; c < in_dim; ++c) {
        const double var = (ts.features.col(c).array() - ts.mean[c]).square().mean();
        const double sd = std::sqrt(var);
        ts.scale[c] = sd < 1e-12 ? 1.0 : sd;
    }
    for (long c = 0; c < in_dim; ++c)
        ts.features.col(c) = (ts.features.col(c).array() - ts.mean[c]) / ts.scale[c];
    return ts;
}

TrainingSet build_dataset(const Dataset& ds, const PolicyConfig& cfg) {
    std::vector<const DemonstrationRecord*> recs;
    for (auto i : ds.train) recs.push_back(&ds.records.at(i));
    return build_dataset(recs, cfg);
}

Eigen::MatrixXd map_features(const Eigen::MatrixXd& z, FeatureMap map) {
    if (map == FeatureMap::linear) return z;
    const long d = z.cols();
    Eigen::MatrixXd out(z.rows(), d + d * (d + 1) / 2);
    out.leftCols(d) = z;
    long c = d;
    for (long i = 0; i < d; ++i)
        for (long j = i; j < d; ++j) out.col(c++) = z.col(i).cwiseProduct(z.col(j));
    return out;
}

ChunkPredictor fit(const TrainingSet& data, const PolicyConfig& cfg, const KinematicChain& chain) {
    cfg.validate();
    if (data.features.rows() < 1) throw std::invalid_argument("fit: no examples");
    if (data.targets.rows() != data.features.rows()) throw DimensionError("fit: feature/target row mismatch");
    require_dim(chain.dof(), data.dof, "chain dof");
    const Eigen::MatrixXd Phi = map_features(data.features, cfg.feature_map);
    ChunkPredictor p;
    p.cfg = cfg;
    p.dof = data.dof;
    p.mean = data.mean;
    p.scale = data.scale;
    p.mapped_mean = Phi.colwise().mean().transpose();
    p.bias = data.targets.colwise().mean().transpose();
    p.lower = chain.lower();
    p.upper = chain.upper();
    const Eigen::MatrixXd Pc = Phi.rowwise() - p.mapped_mean.transpose();
    const Eigen::MatrixXd Yc = data.targets.rowwise() - p.bias.transpose();
    Eigen::MatrixXd A = Pc.transpose() * Pc;
    A.diagonal().array() += cfg.ridge_lambda;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
        throw std::runtime_error("fit: normal equations are singular; use ridge_lambda > 0");
    p.weights = ldlt.solve(Pc.transpose() * Yc);
    if (!p.weights.allFinite()) throw std::runtime_error("fit: non-finite weights; use a larger ridge_lambda");
    return p;
}

ActionChunk ChunkPredictor::predict(const std::vector<Observation>& history, long tick) const {
    if (history.empty()) throw std::invalid_argument("predict: empty observation history");
    const Eigen::VectorXd x = raw_features(history, history.size() - 1, cfg);
    require_dim(x.size(), input_dim(), "policy input");
    Eigen::MatrixXd z = ((x - mean).array() / scale.array()).matrix().transpose();
    z = z.cwiseMax(-cfg.feature_clip).cwiseMin(cfg.feature_clip);
    const Eigen::RowVectorXd phi = map_features(z, cfg.feature_map).row(0) - mapped_mean.transpose();
    const Eigen::RowVectorXd y = phi * weights + bias.transpose();
    ActionChunk c;
    c.issued_at = tick;
    c.actions.resize(cfg.chunk_size, dof);
    for (int j = 0; j < cfg.chunk_size; ++j)
        for (int i = 0; i < dof; ++i) c.actions(j, i) = std::clamp(y[j * dof + i], lower[i], upper[i]);
    return c;
}

ActionChunk ChunkPredictor::predict(const Observation& obs, long tick) const {
    return predict(std::vector<Observation>{obs}, tick);
}

json policy_config_to_json(const PolicyConfig& c) {
    return {{"chunk_size", c.chunk_size},
            {"include_force", c.include_force},
            {"feature_map", c.feature_map == FeatureMap::linear ? "linear" : "poly2"},
            {"ridge_lambda", c.ridge_lambda},
            {"ensemble_mode", c.ensemble_mode == EnsembleMode::uniform ? "uniform" : "exponential"},
            {"ensemble_m", c.ensemble_m},
            {"obs_history_len", c.obs_history_len},
            {"feature_clip", c.feature_clip}};
}

PolicyConfig policy_config_from_json(const json& j) {
    PolicyConfig c;
    c.chunk_size = j.value("chunk_size", c.chunk_size);
    c.include_force = j.value("include_force", c.include_force);
    const std::string fm = j.value("feature_map", std::string("poly2"));
    if (fm == "linear")
        c.feature_map = FeatureMap::linear;
    else if (fm == "poly2" || fm == "polynomial-2")
        c.feature_map = FeatureMap::poly2;
    else
        throw ConfigError("unknown feature_map '" + fm + "'");
    c.ridge_lambda = get_or(j, "ridge_lambda", c.ridge_lambda);
    const std::string em = j.value("ensemble_mode", std::string("uniform"));
    if (em == "uniform")
        c.ensemble_mode = EnsembleMode::uniform;
    else if (em == "exponential")
        c.ensemble_mode = EnsembleMode::exponential;
    else
        throw ConfigError("unknown ensemble_mode '" + em + "'");
    c.ensemble_m = get_or(j, "ensemble_m", c.ensemble_m);
    c.obs_history_len = j.value("obs_history_len", c.obs_history_len);
    c.feature_clip = get_or(j, "feature_clip", c.feature_clip);
    c.validate();
    return c;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const long rows = j.at("rows").get<long>(), cols = j.at("cols").get<long>();
    const auto& data = j.at("data");
    if (static_cast<long>(data.size()) != rows * cols) throw ParseError("weight matrix size mismatch", 0);
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) m(r, c) = data[r * cols + c].get<double>();
    return m;
}

Eigen::VectorXd vec_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = j[i].get<double>();
    return v;
}

}  // namespace

json predictor_to_json(const ChunkPredictor& p) {
    return {{"schema_version", kSchemaVersion},
            {"config", policy_config_to_json(p.cfg)},
            {"dof", p.dof},
            {"normalization", {{"mean", to_json_array(p.mean)}, {"scale", to_json_array(p.scale)}}},
            {"mapped_mean", to_json_array(p.mapped_mean)},
            {"bias", to_json_array(p.bias)},
            {"limits", {{"lower", to_json_array(p.lower)}, {"upper", to_json_array(p.upper)}}},
            {"weights", matrix_to_json(p.weights)}};
}

ChunkPredictor predictor_from_json(const json& j) {
    if (j.value("schema_version", std::string()) != kSchemaVersion)
        throw ParseError("predictor: unsupported schema_version", 0);
    try {
        ChunkPredictor p;
        p.cfg = policy_config_from_json(j.at("config"));
        p.dof = j.at("dof").get<int>();
        p.mean = vec_from_json(j.at("normalization").at("mean"));
        p.scale = vec_from_json(j.at("normalization").at("scale"));
        p.mapped_mean = vec_from_json(j.at("mapped_mean"));
        p.bias = vec_from_json(j.at("bias"));
        p.lower = vec_from_json(j.at("limits").at("lower"));
        p.upper = vec_from_json(j.at("limits").at("upper"));
        p.weights = matrix_from_json(j.at("weights"));
        require_dim(p.bias.size(), static_cast<long>(p.cfg.chunk_size) * p.dof, "predictor bias");
        require_dim(p.weights.cols(), p.bias.size(), "predictor weights");
        require_dim(p.weights.rows(), p.mapped_mean.size(), "predictor weights");
        require_dim(p.scale.size(), p.mean.size(), "predictor scale");
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("predictor: ") + e.what(), 0);
    }
}

void save_predictor(const ChunkPredictor& p, const std::filesystem::path& path) {
    write_file_atomic(path, predictor_to_json(p).dump() + "\n");
}

ChunkPredictor load_predictor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return predictor_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void EnsembleBuffer::push(ActionChunk c) {
    if (c.actions.rows() != k_) throw DimensionError("ensemble: chunk length differs from chunk_size");
    chunks_.push_back(std::move(c));
}

void EnsembleBuffer::evict(long tick) {
    while (!chunks_.empty() && tick >= chunks_.front().issued_at + k_) chunks_.pop_front();
}

JointPositions temporal_ensemble(const EnsembleBuffer& buf, long tick, const PolicyConfig& cfg) {
    Eigen::VectorXd acc;
    double wsum = 0.0;
    for (const auto& c : buf.chunks()) {
        const long age = tick - c.issued_at;
        if (age < 0 || age >= buf.chunk_size()) continue;
        const double w = cfg.ensemble_mode == EnsembleMode::uniform ? 1.0 : std::exp(-cfg.ensemble_m * static_cast<double>(age));
        if (acc.size() == 0) acc = Eigen::VectorXd::Zero(c.actions.cols());
        acc += w * c.actions.row(age).transpose();
        wsum += w;
    }
    if (wsum <= 0) throw std::runtime_error("temporal_ensemble: no chunk covers tick " + std::to_string(tick));
    return acc / wsum;
}

}  // namespace teleop
