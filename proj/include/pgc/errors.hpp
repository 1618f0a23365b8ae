#pragma once

#include <stdexcept>
#include <string>

namespace pgc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error { public: using Error::Error; };
class NotPositiveDefinite : public Error { public: using Error::Error; };
class DivergenceDetected : public Error { public: using Error::Error; };
class OutOfBounds : public Error { public: using Error::Error; };
class IndexOutOfRange : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };
class UnknownKind : public Error { public: using Error::Error; };
class UnknownTrainable : public Error { public: using Error::Error; };
class MissingPredictor : public Error { public: using Error::Error; };
class EmptySet : public Error { public: using Error::Error; };
class NoTruePositives : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class MissingArtifact : public Error { public: using Error::Error; };

}  // namespace pgc
