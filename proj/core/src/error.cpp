#include "dtr/error.hpp"

namespace dtr {
namespace {

std::string compose(const std::string& detail, int stage) {
  if (stage <= 0) return detail;
  return "stage " + std::to_string(stage) + ": " + detail;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& detail, int stage)
    : std::runtime_error(compose(detail, stage)),
      kind_(kind),
      stage_(stage),
      detail_(detail) {}

void rethrow_at_stage(int stage) {
  try {
    throw;
  } catch (const SingularError& e) {
    if (e.stage() != 0) throw;
    throw SingularError(e.detail(), e.columns(), stage);
  } catch (const ConvergenceError& e) {
    if (e.stage() != 0) throw;
    throw ConvergenceError(e.detail(), stage);
  } catch (const EvaluationError&) {
    throw;
  } catch (const IndexError& e) {
    if (e.stage() != 0) throw;
    throw IndexError(e.detail(), stage);
  } catch (const ShapeError& e) {
    if (e.stage() != 0) throw;
    throw ShapeError(e.detail(), stage);
  } catch (const ConfigError& e) {
    if (e.stage() != 0) throw;
    throw ConfigError(e.detail(), stage);
  } catch (const DataError& e) {
    if (e.stage() != 0) throw;
    throw DataError(e.detail(), stage);
  } catch (const NumericalError& e) {
    if (e.stage() != 0) throw;
    throw NumericalError(e.detail(), stage);
  }
}

}  // namespace dtr
