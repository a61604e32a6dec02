#pragma once

#include <stdexcept>
#include <string>

namespace mb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// crypto substrate
class SeedError : public Error { public: using Error::Error; };
class SigningError : public Error { public: using Error::Error; };

// mandates
class MandateError : public Error { public: using Error::Error; };
class ConstraintViolation : public Error { public: using Error::Error; };
class ChainError : public Error { public: using Error::Error; };

// world store
class IngestError : public Error { public: using Error::Error; };
class AuthError : public Error { public: using Error::Error; };

// runtime
class RoutingError : public Error { public: using Error::Error; };
class AbortedByUser : public Error { public: using Error::Error; };
class NoCandidates : public Error { public: using Error::Error; };
class PaymentFailed : public Error { public: using Error::Error; };
class AccessDenied : public Error { public: using Error::Error; };

// defense layer: malformed request, distinct from a Deny verdict
class ValidationError : public Error { public: using Error::Error; };

// red-team harness
class ScenarioError : public Error { public: using Error::Error; };

}  // namespace mb
