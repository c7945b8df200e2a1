"""异常类型 - 数值计算与文件读写中可预期的失败"""


class SphereFmtError(Exception):
    """所有可预期错误的基类"""


class ConfigError(SphereFmtError):
    """命令行参数或配置项非法"""


class PointSetParseError(SphereFmtError):
    """点集 / 数据文件格式错误"""

    def __init__(self, path: str, line: int | None, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {reason}")


class ShapeMismatchError(SphereFmtError):
    """序列长度与求积规则节点数不一致"""


class ConvergenceError(SphereFmtError):
    """共轭梯度在最大迭代次数内未收敛"""

    def __init__(self, iterations: int, residual_norm: float):
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"CG did not converge after {iterations} iterations "
            f"(relative residual {residual_norm:.3e})"
        )


class ResourceLimitError(SphereFmtError):
    """稠密矩阵超出配置的内存上限"""


class ValidationError(SphereFmtError):
    """紧框架条件或求积精确性校验失败"""

    def __init__(self, condition: str, max_deviation: float, detail: str = ""):
        self.condition = condition
        self.max_deviation = max_deviation
        msg = f"{condition} failed (max deviation {max_deviation:.3e})"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)
