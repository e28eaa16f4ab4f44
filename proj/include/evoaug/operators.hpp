#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "evoaug/operator_kind.hpp"
#include "evoaug/random.hpp"
#include "evoaug/raster.hpp"
#include "evoaug/worker.hpp"

namespace evoaug {

/// An executable image transform. Implementations must not mutate their
/// input and must be safe to call concurrently.
class Operator {
public:
    virtual ~Operator() = default;
    virtual RasterImage apply(const RasterImage& img, RandomStream& rng) const = 0;
};

enum class OperatorSource { native, mock, remote };

struct OperatorDescriptor {
    OperatorSource source = OperatorSource::native;
    /// Mock behaviour, or the worker endpoint for remote operators.
    std::string detail;
};

/// Deterministic stand-ins for generative operators.
struct MockBehavior {
    enum class Kind { invert, channel_shuffle, gaussian_noise, identity };
    Kind kind = Kind::identity;
    double sigma = 0.0;  // gaussian_noise only

    /// Accepts "invert", "channel_shuffle", "gaussian_noise", "identity".
    static MockBehavior parse(const std::string& name, double sigma = 0.0);
    std::string describe() const;
};

/// out[c] = in[permutation[c]] for every pixel of a 3-channel image.
RasterImage shuffle_channels(const RasterImage& img, const std::array<int, 3>& permutation);
/// 255 - v for every sample.
RasterImage invert(const RasterImage& img);

/// Maps operator tags to implementations. Classical and NoOp are always
/// present; the registry is read-only once populated and cheap to copy.
class OperatorRegistry {
public:
    explicit OperatorRegistry(ClassicalRanges classical = {});

    /// Throws DuplicateOperator.
    void register_operator(const OperatorKind& tag, OperatorDescriptor descriptor,
                           std::shared_ptr<const Operator> impl);
    /// Throws DuplicateOperator.
    void register_mock(const std::string& name, MockBehavior behavior);
    /// Binds `tag` to a worker operator. Throws UnknownOperator if the
    /// worker's capability list lacks the tag's wire name.
    void register_remote(const OperatorKind& tag, std::shared_ptr<WorkerClient> client,
                         const WorkerCapabilities& caps);

    bool contains(const OperatorKind& tag) const { return entries_.contains(tag.tag()); }
    /// Throws UnknownOperator.
    const Operator& get(const OperatorKind& tag) const;
    const OperatorDescriptor& descriptor(const OperatorKind& tag) const;
    /// Registered tags in registration order.
    const std::vector<OperatorKind>& tags() const { return order_; }
    const ClassicalRanges& classical_ranges() const { return classical_; }

private:
    struct Entry {
        OperatorDescriptor descriptor;
        std::shared_ptr<const Operator> impl;
    };
    ClassicalRanges classical_;
    std::map<std::string, Entry> entries_;
    std::vector<OperatorKind> order_;
};

/// Runs one operator. NoOp returns an exact copy; Classical samples a spec
/// from `rng` and applies it; remote operators issue one worker request.
/// Worker failures surface as OperatorError.
RasterImage apply_operator(const OperatorRegistry& registry, const OperatorKind& tag, const RasterImage& img,
                           RandomStream& rng);

/// Request parameters for a generative operator (NeRF: {"rotation": +/-15,
/// "elevation": 0}); draws from `rng`.
nlohmann::json remote_params(const OperatorKind& tag, const RemoteOperatorConfig& cfg, RandomStream& rng);

}  // namespace evoaug
