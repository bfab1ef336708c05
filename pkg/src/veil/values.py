"""Value domain and three-valued comparison semantics.

Values are None (SQL NULL), int, float, or str.  Every helper here mirrors
SQLite's behaviour so that expressions evaluated in the shim agree bit-for-bit
with the same expressions compiled to SQL and run on the backend.
"""
from __future__ import annotations

NUMERIC = (int, float)


def type_rank(v):
    # SQLite storage-class ordering: NULL < numeric < text.
    if v is None:
        return 0
    if isinstance(v, bool) or isinstance(v, NUMERIC):
        return 1
    return 2


def to_number(v):
    """SQLite-style numeric coercion for arithmetic contexts."""
    if v is None:
        return None
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, NUMERIC):
        return v
    s = v.strip()
    for end in range(len(s), 0, -1):
        chunk = s[:end]
        try:
            return int(chunk)
        except ValueError:
            try:
                return float(chunk)
            except ValueError:
                continue
    return 0


def arith(op, a, b):
    a = to_number(a)
    b = to_number(b)
    if a is None or b is None:
        return None
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            return None
        if isinstance(a, int) and isinstance(b, int):
            # SQLite integer division truncates toward zero.
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        return a / b
    if op == "%":
        # Operands are treated as integers; remainder takes the dividend's
        # sign and modulo zero is NULL, as in SQLite.
        ia, ib = int(a), int(b)
        if ib == 0:
            return None
        r = abs(ia) % abs(ib)
        if ia < 0:
            r = -r
        return float(r) if isinstance(a, float) or isinstance(b, float) else r
    raise ValueError(f"unknown arithmetic operator {op!r}")


def compare(op, a, b):
    """Three-valued comparison; returns True, False or None (unknown)."""
    if a is None or b is None:
        return None
    if isinstance(a, bool):
        a = int(a)
    if isinstance(b, bool):
        b = int(b)
    if op == "<>":
        op = "!="
    ra, rb = type_rank(a), type_rank(b)
    if ra != rb:
        # Cross-class: never equal; ordering follows class rank.
        if op == "=":
            return False
        if op == "!=":
            return True
        lt = ra < rb
    else:
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        lt = a < b
    eq = (ra == rb) and a == b
    if op == "<":
        return lt and not eq
    if op == "<=":
        return lt or eq
    if op == ">":
        return not lt and not eq
    if op == ">=":
        return not lt or eq
    raise ValueError(f"unknown comparison operator {op!r}")


def and3(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def or3(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def not3(a):
    return None if a is None else not a


def truth(v):
    """Strict truth: unknown filters out, as in SQL WHERE."""
    return v is True


def _float_text(v):
    """SQLite's float rendering: 15 significant digits, halves rounded away
    from zero, fixed notation for exponents in [-4, 15), and a mandatory
    decimal point in the mantissa."""
    from decimal import Decimal, ROUND_HALF_UP
    import math
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    if v == 0:
        return "0.0"
    d = Decimal(v)
    sign = "-" if d < 0 else ""
    d = abs(d)
    exp10 = d.adjusted()
    q = (d.scaleb(-exp10)).quantize(Decimal("1." + "0" * 14),
                                    rounding=ROUND_HALF_UP)
    if q >= 10:
        q = q.scaleb(-1)
        exp10 += 1
    digits = str(q).replace(".", "").rstrip("0") or "0"
    if -4 <= exp10 < 15:
        if exp10 >= 0:
            ip = digits[:exp10 + 1].ljust(exp10 + 1, "0")
            fp = digits[exp10 + 1:]
            return f"{sign}{ip}.{fp or '0'}"
        return f"{sign}0.{'0' * (-exp10 - 1)}{digits}"
    mantissa = f"{digits[0]}.{digits[1:] or '0'}"
    return f"{sign}{mantissa}e{exp10:+03d}"


def to_text(v):
    """SQLite CAST(x AS TEXT)."""
    if v is None:
        return None
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return _float_text(v)
    return str(v)


def bool_to_int(v):
    if v is None:
        return None
    return 1 if v else 0


def canonical_key(v):
    """Total order over all values, used for deterministic tie-breaking."""
    r = type_rank(v)
    if r == 0:
        return (0, 0)
    if r == 1:
        return (1, float(v))
    return (2, v)
