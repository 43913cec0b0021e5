"""Detection and emulation of DMA input channels from memory-access streams."""

from .channel_tracker import (BufferTracker, ChannelState, ChannelTracker, Direction, DmaChannel,
                              InjectionAction, LifecycleEvent, TerminationReason)
from .engine import DmaEngine
from .events import AccessKind, ContractError, MemoryAccessEvent
from .input_source import (Exhaustion, InputExhausted, ShadowRam, StreamProvider, ZeroProvider,
                           read_through, stream_provider, zero_provider)
from .memory_map import (BUILTIN_PROFILES, AddressClass, AddressRange, MemoryMapProfile,
                         ProfileError, ProfileOverlapError, classify, is_pointer_like,
                         load_profile, parse_profile)
from .scenario_sim import Scenario, ScenarioError, builtin_scenarios, get_scenario, run_scenario
from .stream_detector import Pointer, StreamConfiguration, StreamDetector

__version__ = "0.1.0"

__all__ = [
    "AccessKind",
    "AddressClass",
    "AddressRange",
    "BUILTIN_PROFILES",
    "BufferTracker",
    "ChannelState",
    "ChannelTracker",
    "ContractError",
    "Direction",
    "DmaChannel",
    "DmaEngine",
    "Exhaustion",
    "InjectionAction",
    "InputExhausted",
    "LifecycleEvent",
    "MemoryAccessEvent",
    "MemoryMapProfile",
    "Pointer",
    "ProfileError",
    "ProfileOverlapError",
    "Scenario",
    "ScenarioError",
    "ShadowRam",
    "StreamConfiguration",
    "StreamDetector",
    "StreamProvider",
    "TerminationReason",
    "ZeroProvider",
    "builtin_scenarios",
    "classify",
    "get_scenario",
    "is_pointer_like",
    "load_profile",
    "parse_profile",
    "read_through",
    "run_scenario",
    "stream_provider",
    "zero_provider",
]
