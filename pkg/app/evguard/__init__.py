"""evguard: ransomware attack and detection testbed for SCADA-controlled EV charging."""

__version__ = "0.1.0"
