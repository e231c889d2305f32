#!/usr/bin/env python3
"""
Console Logging Utilities

This module provides the console output helpers shared by the simulator,
fuel analysis and benchmark commands: levelled icon-prefixed messages and
step banners with an end-of-run summary.

Usage:
    from log_utils import log, print_step, print_steps_summary

Environment Variables:
    TMA_LOG_LEVEL - Minimum level printed: DEBUG, INFO, WARNING, ERROR (default: INFO)
"""

import os
from datetime import datetime

LEVELS = {"DEBUG": 10, "INFO": 20, "SUCCESS": 25, "WARNING": 30, "ERROR": 40}
ICONS = {"DEBUG": "🔎", "INFO": "", "SUCCESS": "✅", "WARNING": "⚠️ ", "ERROR": "❌"}


def _threshold() -> int:
    return LEVELS.get(os.getenv("TMA_LOG_LEVEL", "INFO").upper(), LEVELS["INFO"])


def log(message: str, level: str = "INFO") -> None:
    """Print a message with its level icon if the level passes TMA_LOG_LEVEL."""
    level = level.upper()
    if LEVELS.get(level, LEVELS["INFO"]) < _threshold():
        return
    icon = ICONS.get(level, "")
    print(f"{icon} {message}" if icon else message, flush=True)


def print_step(step_num: int = None, total_steps: int = None, description: str = None, **kwargs):
    """
    Print operation step information.

    Args:
        step_num: Optional current step number
        total_steps: Optional total number of steps
        description: Optional description of what this step does
        **kwargs: Parameters for display purposes
    """
    if _threshold() > LEVELS["INFO"]:
        return
    if step_num is not None and total_steps is not None and description:
        print(f"\n📋 Step {step_num}/{total_steps}: {description}")
    elif description:
        print(f"\n📋 {description}")

    if kwargs:
        args_str = ", ".join([f"{k}={v}" for k, v in kwargs.items()])
        print(f"   Parameters: {args_str}")


def print_steps_summary(title: str = None, executed_steps: list = None, failed_steps: list = None):
    """Print a command execution summary."""
    if _threshold() > LEVELS["INFO"]:
        return
    any_failures = bool(failed_steps)
    status_icon = "⚠️" if any_failures else "🎉"
    status_text = "COMPLETED WITH FAILURES" if any_failures else "COMPLETED SUCCESSFULLY"

    print("\n" + "=" * 60)
    print(f"{status_icon} {(title or 'OPERATION').upper()} {status_text}!")
    print("=" * 60)
    print(f"📅 Completed: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    if executed_steps:
        print("\n✅ SUCCESSFULLY EXECUTED:")
        for step in executed_steps:
            print(f"   ✓ {step}")

    if failed_steps:
        print("\n❌ FAILED STEPS:")
        for step in failed_steps:
            print(f"   ⚠️ {step}")
    print("=" * 60)
