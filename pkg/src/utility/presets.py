"""
Published generator pairs, as (a, b) coefficients of x -> ax + b.
"""
from core.construct import GeneratorPair


# Generator pairs for L = 6, keyed by P
PUBLISHED = {
    384: ([(221, 358), (101, 314), (217, 92)],
          [(199, 303), (169, 324), (343, 375)]),
    768: ([(235, 723), (127, 345), (277, 6)],
          [(565, 374), (725, 166), (709, 366)]),
    1536: ([(1003, 723), (91, 219), (1045, 6)],
           [(1333, 1142), (65, 1248), (473, 1012)]),
    3072: ([(2155, 1773), (1165, 1110), (1237, 2010)],
           [(2957, 1238), (1885, 638), (2425, 2908)]),
    6144: ([(1099, 1665), (5875, 69), (1153, 5952)],
           [(2957, 974), (2173, 4838), (1973, 2386)]),
    6500: ([(1, 2998), (1501, 3518), (5501, 2346)],
           [(3251, 4459), (3251, 3900), (1, 988)]),
    12288: ([(3433, 3987), (10801, 9018), (10177, 6408)],
            [(6065, 5770), (3169, 2932), (10193, 8070)]),
}

# The small worked pair over Z_8
EXAMPLE = ([(5, 7), (5, 3), (1, 6)], [(5, 7), (5, 5), (5, 7)])
EXAMPLE_P = 8


def published(P):
    """Return the published generator pair for block size P.

    Raises:
        KeyError: No pair is published for P.
    """
    if P not in PUBLISHED:
        raise KeyError(f"no preset for P={P}; available: {sorted(PUBLISHED)}")
    f, g = PUBLISHED[P]
    return GeneratorPair.from_coefficients(f, g, P)


def example():
    """Return the P = 8 pair whose arrays have girth 8."""
    f, g = EXAMPLE
    return GeneratorPair.from_coefficients(f, g, EXAMPLE_P)


def preset(P):
    """Return the preset pair for P, including the P = 8 example."""
    return example() if P == EXAMPLE_P else published(P)
