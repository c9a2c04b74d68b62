#!/usr/bin/env python
"""
Entry point for the antipt_spdc CLI.

This module is executed when running:
    python -m antipt_spdc
"""

import sys

from antipt_spdc.cli import main

if __name__ == "__main__":
    sys.exit(main())
