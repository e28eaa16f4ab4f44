#include "evoaug/operators.hpp"

#include <algorithm>
#include <cmath>

#include "evoaug/errors.hpp"

namespace evoaug {
namespace {

class NoOpOperator : public Operator {
public:
    RasterImage apply(const RasterImage& img, RandomStream&) const override { return img; }
};

class ClassicalOperator : public Operator {
public:
    explicit ClassicalOperator(ClassicalRanges ranges) : ranges_(ranges) {}
    RasterImage apply(const RasterImage& img, RandomStream& rng) const override {
        return apply_transform(img, sample_classical_spec(rng, ranges_));
    }

private:
    ClassicalRanges ranges_;
};

// The five non-identity permutations of three channels.
constexpr std::array<std::array<int, 3>, 5> kShuffles{{
    {0, 2, 1},
    {1, 0, 2},
    {1, 2, 0},
    {2, 0, 1},
    {2, 1, 0},
}};

class MockOperator : public Operator {
public:
    explicit MockOperator(MockBehavior b) : behavior_(b) {}

    RasterImage apply(const RasterImage& img, RandomStream& rng) const override {
        switch (behavior_.kind) {
            case MockBehavior::Kind::identity:
                return img;
            case MockBehavior::Kind::invert:
                return invert(img);
            case MockBehavior::Kind::channel_shuffle: {
                if (img.channels() != 3) return img;
                return shuffle_channels(img, kShuffles[rng.below(kShuffles.size())]);
            }
            case MockBehavior::Kind::gaussian_noise: {
                if (behavior_.sigma <= 0.0) return img;
                RasterImage out = img;
                for (auto& v : out.mutable_data()) {
                    const double noisy = v + std::round(rng.normal(0.0, behavior_.sigma));
                    v = static_cast<std::uint8_t>(std::clamp(noisy, 0.0, 255.0));
                }
                return out;
            }
        }
        return img;
    }

private:
    MockBehavior behavior_;
};

class RemoteOperator : public Operator {
public:
    RemoteOperator(OperatorKind tag, std::shared_ptr<WorkerClient> client)
        : tag_(std::move(tag)), wire_(wire_name(tag_)), client_(std::move(client)) {}

    RasterImage apply(const RasterImage& img, RandomStream& rng) const override {
        const auto params = remote_params(tag_, client_->config(), rng);
        const std::uint64_t seed = rng.next_u64();
        RasterImage out;
        try {
            out = client_->augment(wire_, img, params, seed);
        } catch (const OperatorError& e) {
            throw OperatorError(tag_.tag(), e.detail());
        } catch (const Error& e) {
            throw OperatorError(tag_.tag(), e.what());
        }
        if (out.width() != img.width() || out.height() != img.height())
            throw OperatorError(tag_.tag(), "worker returned an image of different dimensions");
        if (out.channels() != img.channels())
            throw OperatorError(tag_.tag(), "worker returned an image with a different channel count");
        return out;
    }

private:
    OperatorKind tag_;
    std::string wire_;
    std::shared_ptr<WorkerClient> client_;
};

}  // namespace

MockBehavior MockBehavior::parse(const std::string& name, double sigma) {
    MockBehavior b;
    b.sigma = sigma;
    if (name == "invert") b.kind = Kind::invert;
    else if (name == "channel_shuffle") b.kind = Kind::channel_shuffle;
    else if (name == "gaussian_noise") b.kind = Kind::gaussian_noise;
    else if (name == "identity") b.kind = Kind::identity;
    else throw ConfigError("unknown mock behavior: " + name);
    if (b.kind == Kind::gaussian_noise && !(sigma >= 0.0 && std::isfinite(sigma)))
        throw ConfigError("gaussian_noise sigma must be a finite non-negative number");
    return b;
}

std::string MockBehavior::describe() const {
    switch (kind) {
        case Kind::invert: return "invert";
        case Kind::channel_shuffle: return "channel_shuffle";
        case Kind::gaussian_noise: return "gaussian_noise{sigma=" + std::to_string(sigma) + "}";
        case Kind::identity: return "identity";
    }
    return "identity";
}

RasterImage shuffle_channels(const RasterImage& img, const std::array<int, 3>& permutation) {
    if (img.channels() != 3) throw FormatError("channel shuffle needs a 3-channel image");
    RasterImage out = img;
    const auto src = img.data();
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < src.size(); i += 3)
        for (int c = 0; c < 3; ++c) dst[i + c] = src[i + permutation[c]];
    return out;
}

RasterImage invert(const RasterImage& img) {
    RasterImage out = img;
    for (auto& v : out.mutable_data()) v = static_cast<std::uint8_t>(255 - v);
    return out;
}

OperatorRegistry::OperatorRegistry(ClassicalRanges classical) : classical_(classical) {
    classical_.validate();
    register_operator(OperatorKind(op_names::kNoOp), {OperatorSource::native, "noop"},
                      std::make_shared<NoOpOperator>());
    register_operator(OperatorKind(op_names::kClassical), {OperatorSource::native, "classical"},
                      std::make_shared<ClassicalOperator>(classical_));
}

void OperatorRegistry::register_operator(const OperatorKind& tag, OperatorDescriptor descriptor,
                                         std::shared_ptr<const Operator> impl) {
    if (entries_.contains(tag.tag())) throw DuplicateOperator(tag.tag());
    entries_.emplace(tag.tag(), Entry{std::move(descriptor), std::move(impl)});
    order_.push_back(tag);
}

void OperatorRegistry::register_mock(const std::string& name, MockBehavior behavior) {
    register_operator(OperatorKind(name), {OperatorSource::mock, behavior.describe()},
                      std::make_shared<MockOperator>(behavior));
}

void OperatorRegistry::register_remote(const OperatorKind& tag, std::shared_ptr<WorkerClient> client,
                                       const WorkerCapabilities& caps) {
    if (!caps.supports(wire_name(tag)))
        throw UnknownOperator(tag.tag() + " (not advertised by worker " + client->config().endpoint + ")");
    const std::string endpoint = client->config().endpoint;
    register_operator(tag, {OperatorSource::remote, endpoint},
                      std::make_shared<RemoteOperator>(tag, std::move(client)));
}

const Operator& OperatorRegistry::get(const OperatorKind& tag) const {
    const auto it = entries_.find(tag.tag());
    if (it == entries_.end()) throw UnknownOperator(tag.tag());
    return *it->second.impl;
}

const OperatorDescriptor& OperatorRegistry::descriptor(const OperatorKind& tag) const {
    const auto it = entries_.find(tag.tag());
    if (it == entries_.end()) throw UnknownOperator(tag.tag());
    return it->second.descriptor;
}

RasterImage apply_operator(const OperatorRegistry& registry, const OperatorKind& tag, const RasterImage& img,
                           RandomStream& rng) {
    return registry.get(tag).apply(img, rng);
}

nlohmann::json remote_params(const OperatorKind& tag, const RemoteOperatorConfig& cfg, RandomStream& rng) {
    nlohmann::json params = nlohmann::json::object();
    if (tag.tag() == op_names::kNeRF) {
        const auto& choices = cfg.nerf_rotation_degrees;
        params["rotation"] = choices[rng.below(choices.size())];
        params["elevation"] = 0;
    }
    return params;
}

}  // namespace evoaug
