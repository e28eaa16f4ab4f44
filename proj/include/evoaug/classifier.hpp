#pragma once

#include <vector>

#include <Eigen/Dense>

namespace evoaug {

struct ClassifierConfig {
    int epochs = 20;
    double learning_rate = 1e-3;
    double l2 = 0.0;

    void validate() const;
};

/// Multinomial logistic regression over embeddings.
struct SoftmaxHead {
    Eigen::MatrixXd weights;  // classes x dim
    Eigen::VectorXd bias;     // classes

    static SoftmaxHead zeros(int classes, int dim);
    int classes() const { return static_cast<int>(weights.rows()); }
    int dim() const { return static_cast<int>(weights.cols()); }
};

struct ObjectiveValue {
    double loss = 0.0;
    Eigen::MatrixXd grad_weights;
    Eigen::VectorXd grad_bias;
};

/// Mean cross-entropy over rows of `x` plus (l2/2)·||W||², with its gradient.
ObjectiveValue softmax_objective(const SoftmaxHead& head, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 double l2);

/// Full-batch gradient descent from zero weights; deterministic.
/// Throws DimensionMismatch when labels and rows disagree or a label is out
/// of range.
SoftmaxHead train_head(const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes,
                       const ClassifierConfig& cfg);

struct HeadEvaluation {
    double loss = 0.0;      // mean -ln p(true class)
    double accuracy = 0.0;  // argmax matches; ties go to the lowest index
};

HeadEvaluation eval_head(const SoftmaxHead& head, const Eigen::MatrixXd& x, const std::vector<int>& labels);

}  // namespace evoaug
