"""Free-energy-bounded cryptography simulator."""
