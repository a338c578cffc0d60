"""Exception hierarchy.

Every error carries a stable string ``code`` and an ``exit_status`` used by the
command-line front end: 1 for invalid input, 2 for numerical failure.
"""


class GaussNetError(Exception):
    code = "error"
    exit_status = 1

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ValidationError(GaussNetError):
    code = "validation"
    exit_status = 1


class NumericalError(GaussNetError):
    code = "numerical"
    exit_status = 2


class CyclicGraph(ValidationError):
    code = "cyclic_graph"


class RoutingRowExceedsOne(ValidationError):
    code = "routing_row_exceeds_one"

    def __init__(self, node: int, total: float):
        super().__init__(f"routing fractions out of node {node} sum to {total!r} > 1")
        self.node = node
        self.total = total


class Unstable(ValidationError):
    code = "unstable"

    def __init__(self, node: int, slack: float):
        super().__init__(f"node {node} is not stable: service minus load = {slack!r}")
        self.node = node
        self.slack = slack

    def payload(self) -> dict:
        return {**super().payload(), "node": self.node, "slack": self.slack}


class InvalidPath(ValidationError):
    code = "invalid_path"


class TooManyPaths(ValidationError):
    code = "too_many_paths"


class SchemaError(ValidationError):
    code = "schema"


class HypothesisViolated(ValidationError):
    code = "hypothesis_violated"


class DomainViolation(ValidationError):
    code = "domain_violation"


class UnsupportedCase(ValidationError):
    code = "unsupported_case"


class TooManyCombinations(ValidationError):
    code = "too_many_combinations"


class NotPSD(NumericalError):
    code = "not_psd"

    def __init__(self, min_eigenvalue: float, floor: float):
        super().__init__(
            f"covariance matrix is not positive semidefinite: "
            f"smallest eigenvalue {min_eigenvalue!r} < floor {floor!r}"
        )
        self.min_eigenvalue = min_eigenvalue
        self.floor = floor


class DegenerateVariance(NumericalError):
    code = "degenerate_variance"


class SingularCovariance(NumericalError):
    code = "singular_covariance"


class OptimizerFailure(NumericalError):
    code = "optimizer_failure"


class AllZeroCounts(NumericalError):
    code = "all_zero_counts"

    def __init__(self, message: str, advice: str):
        super().__init__(message)
        self.advice = advice

    def payload(self) -> dict:
        return {**super().payload(), "advice": self.advice}
