"""Exception hierarchy shared by the library and the command line."""


class NetPointError(Exception):
    """Base class for every error raised by netpoint."""


class InputError(NetPointError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateBearingError(InputError):
    """Bearing requested between (nearly) coincident points."""


class DivergenceError(NetPointError, RuntimeError):
    """Simulation state became non-finite or exceeded the divergence guard."""


class EigenConvergenceError(NetPointError, RuntimeError):
    """The eigenvalue iteration did not converge."""


class ScenarioError(NetPointError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The scenario file is not valid YAML."""


class ScenarioSchemaError(ScenarioError):
    """Unknown, missing or mistyped keys in the scenario file."""


class ScenarioInvariantError(ScenarioError):
    """The scenario parses but describes an invalid experiment."""
