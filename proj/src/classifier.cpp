#include "evoaug/classifier.hpp"

#include <cmath>

#include "evoaug/errors.hpp"

namespace evoaug {

void ClassifierConfig::validate() const {
    if (epochs < 0) throw ConfigError("classifier epochs must be non-negative");
    if (!(learning_rate > 0.0)) throw ConfigError("classifier learning_rate must be positive");
    if (!(l2 >= 0.0)) throw ConfigError("classifier l2 must be non-negative");
}

SoftmaxHead SoftmaxHead::zeros(int classes, int dim) {
    return {Eigen::MatrixXd::Zero(classes, dim), Eigen::VectorXd::Zero(classes)};
}

namespace {

void check_shapes(const SoftmaxHead& head, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
    if (x.cols() != head.weights.cols())
        throw DimensionMismatch("embedding dim " + std::to_string(x.cols()) + " vs head dim " +
                                std::to_string(head.weights.cols()));
    if (static_cast<Eigen::Index>(labels.size()) != x.rows())
        throw DimensionMismatch(std::to_string(labels.size()) + " labels for " + std::to_string(x.rows()) + " rows");
    for (int l : labels)
        if (l < 0 || l >= head.classes())
            throw DimensionMismatch("label " + std::to_string(l) + " outside " + std::to_string(head.classes()) +
                                    " classes");
}

// Row-wise log-softmax of the logits, computed stably.
Eigen::MatrixXd log_probabilities(const SoftmaxHead& head, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd z = x * head.weights.transpose();
    z.rowwise() += head.bias.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        const double lse = m + std::log((z.row(i).array() - m).exp().sum());
        z.row(i).array() -= lse;
    }
    return z;
}

}  // namespace

ObjectiveValue softmax_objective(const SoftmaxHead& head, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 double l2) {
    check_shapes(head, x, labels);
    const auto n = static_cast<double>(x.rows());
    const Eigen::MatrixXd logp = log_probabilities(head, x);
    Eigen::MatrixXd delta = logp.array().exp();  // probabilities, minus one-hot below
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto y = labels[static_cast<std::size_t>(i)];
        loss -= logp(i, y);
        delta(i, y) -= 1.0;
    }
    ObjectiveValue v;
    v.loss = loss / n + 0.5 * l2 * head.weights.squaredNorm();
    v.grad_weights = delta.transpose() * x / n + l2 * head.weights;
    v.grad_bias = delta.colwise().sum().transpose() / n;
    return v;
}

SoftmaxHead train_head(const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes,
                       const ClassifierConfig& cfg) {
    cfg.validate();
    auto head = SoftmaxHead::zeros(classes, static_cast<int>(x.cols()));
    check_shapes(head, x, labels);
    for (int e = 0; e < cfg.epochs; ++e) {
        const auto g = softmax_objective(head, x, labels, cfg.l2);
        head.weights -= cfg.learning_rate * g.grad_weights;
        head.bias -= cfg.learning_rate * g.grad_bias;
    }
    return head;
}

HeadEvaluation eval_head(const SoftmaxHead& head, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
    check_shapes(head, x, labels);
    HeadEvaluation r;
    if (x.rows() == 0) return r;
    const Eigen::MatrixXd logp = log_probabilities(head, x);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto y = labels[static_cast<std::size_t>(i)];
        r.loss -= logp(i, y);
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logp.cols(); ++c)
            if (logp(i, c) > logp(i, best)) best = c;
        if (best == y) ++correct;
    }
    r.loss /= static_cast<double>(x.rows());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
    return r;
}

}  // namespace evoaug
