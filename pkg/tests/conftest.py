"""Shared fixtures for the test suite."""

from __future__ import annotations

import pytest

from netcfg_agent.backend import MockChatBackend
from netcfg_agent.prompts import TemplateSet, default_templates
from netcfg_agent.verifier import CommandGrammar, default_grammar

#: Valid four-line configuration exercising the exec -> privileged ->
#: global-config -> interface-config chain.
OAM_CONFIG = (
    "enable\n"
    "configure terminal\n"
    "interface GigabitEthernet0/1\n"
    "ethernet oam remote-failure link-fault action error-block-interface"
)

OSPF_CONFIG = (
    "enable\n"
    "configure terminal\n"
    "router ospf 1\n"
    "network 192.168.1.0 0.0.0.255 area 0"
)

CLASSIFY_LEAD = "Classify this configuration intent"
STEPS_LEAD = "Decompose this intent into preparation steps"
GENERATE_LEAD = "Generate the device configuration"
REFINE_LEAD = "Revise the previous configuration"


@pytest.fixture(scope="session")
def grammar() -> CommandGrammar:
    return default_grammar()


@pytest.fixture(scope="session")
def templates() -> TemplateSet:
    return default_templates()


def scripted_mock(
    *,
    label: str = "device-setup",
    steps: str = "1. Prepare the device\n2. Apply the configuration",
    generate: str | None = None,
    refine: str | None = None,
    default: str = "",
) -> MockChatBackend:
    """Mock wired for a full session: classify and plan answers plus
    optional generation/refinement answers."""
    mock = MockChatBackend(default_response=default)
    mock.register(label, contains=CLASSIFY_LEAD)
    mock.register(steps, contains=STEPS_LEAD)
    if generate is not None:
        mock.register(generate, contains=GENERATE_LEAD)
    if refine is not None:
        mock.register(refine, contains=REFINE_LEAD)
    return mock
