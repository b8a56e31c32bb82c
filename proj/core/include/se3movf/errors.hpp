#pragma once

#include <stdexcept>
#include <string>

namespace se3movf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// volume / file ingestion
struct BadMagic : Error { using Error::Error; };
struct UnsupportedDtype : Error { using Error::Error; };
struct FortranOrder : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };
struct BadZip : Error { using Error::Error; };
struct MissingEntry : Error {
    explicit MissingEntry(const std::string& name)
        : Error("missing entry: " + name), entry(name) {}
    std::string entry;
};

// gaussian
struct NonPositiveSigma : Error { using Error::Error; };
struct KernelLargerThanAxisWithReflect : Error { using Error::Error; };

// frame
struct NonFiniteInput : Error { using Error::Error; };
struct MultiChannelInput : Error { using Error::Error; };

// network
struct ShapeMismatch : Error { using Error::Error; };
struct EvenDimensionWithStride : Error { using Error::Error; };
struct StaleCache : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct MissingTensor : Error {
    explicit MissingTensor(const std::string& name)
        : Error("checkpoint missing tensor: " + name), tensor(name) {}
    std::string tensor;
};

// train
struct LabelOutOfRange : Error { using Error::Error; };

// equicheck
struct UnknownChannelTransformType : Error { using Error::Error; };

// cli / config
struct ConfigError : Error { using Error::Error; };

} // namespace se3movf
