#pragma once

#include <stdexcept>
#include <string>

namespace gmclab {

/// Base class for all errors raised by the library.  Every failure mode that
/// a caller can provoke through bad inputs or unlucky numerics derives from
/// this, so CLI code can map any of them to a diagnostic and exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define GMCLAB_DEFINE_ERROR(NAME)                                     \
    class NAME : public Error {                                       \
    public:                                                           \
        explicit NAME(const std::string& what) : Error(#NAME ": " + what) {} \
    }

GMCLAB_DEFINE_ERROR(DivergentIntegral);
GMCLAB_DEFINE_ERROR(QuadratureBudgetExceeded);
GMCLAB_DEFINE_ERROR(NotPSD);
GMCLAB_DEFINE_ERROR(EigensolverFailure);
GMCLAB_DEFINE_ERROR(NotACoupling);
GMCLAB_DEFINE_ERROR(ResidualNotPSD);
GMCLAB_DEFINE_ERROR(WindowNotInterior);
GMCLAB_DEFINE_ERROR(UnderResolved);
GMCLAB_DEFINE_ERROR(EpsilonUnderResolved);
GMCLAB_DEFINE_ERROR(NonPositiveTransform);
GMCLAB_DEFINE_ERROR(MissingFourierData);
GMCLAB_DEFINE_ERROR(MissingFactorData);
GMCLAB_DEFINE_ERROR(NoValidRadius);
GMCLAB_DEFINE_ERROR(RateNotNegative);
GMCLAB_DEFINE_ERROR(SinglePoint);
GMCLAB_DEFINE_ERROR(NotCertified);
GMCLAB_DEFINE_ERROR(BudgetUnreachable);
GMCLAB_DEFINE_ERROR(ConfigError);
GMCLAB_DEFINE_ERROR(IOError);

#undef GMCLAB_DEFINE_ERROR

} // namespace gmclab
