from .program import Cone, ConicProgram, Expr, ModelBuilder
from .ipm import SolveReport, Tolerances, kkt_residuals, solve

__all__ = ["Cone", "ConicProgram", "Expr", "ModelBuilder", "SolveReport", "Tolerances",
           "kkt_residuals", "solve"]
from .export import FormatError, export_program, program_from_json, program_to_json, read_conic, solve_external, write_conic

__all__ += ["FormatError", "export_program", "program_from_json", "program_to_json", "read_conic",
            "solve_external", "write_conic"]
