#!/usr/bin/env python3
"""
Unit Helper
Converts quantities between the units accepted in atomfiber scenario files.

Scenario documents carry unit-suffixed strings ("10 G", "57.5 um"). This tool
reads the same text and prints it in another unit of the same dimension, or
prints the SI value the simulator works with.

Usage:
    python unit_helper.py "10 G" T
    python unit_helper.py "500 G/cm" T/m
    python unit_helper.py --si "57.5 um"
    python unit_helper.py --list
"""

import os
import sys
import argparse

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from atomfiber.units import UNITS, QuantityError, format_quantity, parse_quantity


def convert(text: str, unit: str) -> str:
    """Re-express a quantity in another unit of the same dimension."""
    if unit not in UNITS:
        raise QuantityError(f"Unknown unit '{unit}'")
    _, dimension = UNITS[unit]
    return format_quantity(parse_quantity(text, dimension), unit)


def units_by_dimension():
    """SI dimension -> accepted unit symbols, in table order."""
    groups = {}
    for symbol, (_, dimension) in UNITS.items():
        groups.setdefault(dimension, []).append(symbol)
    return groups


def main(argv=None):
    parser = argparse.ArgumentParser(
        description='Convert quantities between atomfiber units',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s "10 G" T               # Output: 0.001 T
  %(prog)s "1.6 s" ms             # Output: 1600.0 ms
  %(prog)s --si "57.5 um"         # Output: 5.75e-05
  %(prog)s --list                 # Accepted units grouped by dimension
        """
    )

    parser.add_argument('quantity', nargs='?',
                        help='Quantity text, e.g. "10 G"')
    parser.add_argument('unit', nargs='?',
                        help='Target unit, e.g. T')
    parser.add_argument('-s', '--si', action='store_true',
                        help='Print the SI value as a bare number')
    parser.add_argument('-l', '--list', action='store_true',
                        help='List accepted units')

    args = parser.parse_args(argv)

    if args.list:
        for dimension, symbols in units_by_dimension().items():
            print(f"{dimension:>6}: {', '.join(symbols)}")
        return 0

    if args.quantity is None:
        parser.print_help()
        return 0

    try:
        if args.si:
            print(repr(parse_quantity(args.quantity)))
        elif args.unit is None:
            print("Error: a target unit is required (or use --si)")
            return 1
        else:
            print(convert(args.quantity, args.unit))
    except QuantityError as e:
        print(f"Error: {str(e).splitlines()[0]}")
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
