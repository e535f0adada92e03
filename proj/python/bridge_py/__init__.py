"""Python bindings for the bridge library.

Tasks are exchanged as plain dicts in the dataset record format.
"""

import json

from . import _bridge
from ._bridge import (
    ExtractError,
    GenerationError,
    ParseError,
    ToyPolicy,
    VerificationError,
    closed_form_advantages,
    group_advantages,
    info_coefficient,
    outcome_reward,
    per_step_influence,
    per_step_influence_raw,
    project,
    rejection_filter,
)

__all__ = [
    "ExtractError",
    "GenerationError",
    "ParseError",
    "ToyPolicy",
    "VerificationError",
    "bridge_augment",
    "closed_form_advantages",
    "cot_problem",
    "generate_igsm",
    "generate_pb",
    "group_advantages",
    "info_coefficient",
    "outcome_reward",
    "worked_task",
    "per_step_influence",
    "per_step_influence_raw",
    "pp_aug",
    "project",
    "rc_aug",
    "rejection_filter",
    "render_answer",
    "render_query",
    "render_sft_record",
    "round_trips",
    "verify_cot",
]


def _dump(task):
    return json.dumps(task)


def generate_igsm(seed, op_range=(15, 20)):
    return json.loads(_bridge.generate_igsm(seed, op_range[0], op_range[1]))


def generate_pb(seed, depth=4, redundancy=(0, 0)):
    return json.loads(_bridge.generate_pb(seed, depth, redundancy[0], redundancy[1]))


def worked_task(which):
    """'igsm', 'igsm-bridge' or 'pb'."""
    return json.loads(_bridge.worked_task(which))


def render_query(task):
    return _bridge.render_query(_dump(task))


def render_answer(task):
    return _bridge.render_answer(_dump(task))


def render_sft_record(task, template_family="qwen"):
    return _bridge.render_sft_record(_dump(task), template_family)


def cot_problem(task):
    return _bridge.cot_problem(_dump(task))


def verify_cot(task):
    return _bridge.verify_cot(_dump(task))


def round_trips(task):
    """True when the Dag extracted from the rendered text matches the task's Dag."""
    return _bridge.round_trips(_dump(task))


def bridge_augment(task, p=0.1, seed=0):
    return json.loads(_bridge.bridge_augment(_dump(task), p, seed))


def pp_aug(task, copies, seed):
    return [json.loads(t) for t in _bridge.pp_aug(_dump(task), copies, seed)]


def rc_aug(task, copies, seed):
    return [json.loads(t) for t in _bridge.rc_aug(_dump(task), copies, seed)]
