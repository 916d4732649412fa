"""virtee: a user-space virtual TEE framework.

Client applications talk to trusted applications through a GlobalPlatform
style client API; a Manager/Launcher process pair provides TA lifecycle,
session routing, shared memory, secure storage and crash cleanup.
"""

__version__ = "0.1.0"
