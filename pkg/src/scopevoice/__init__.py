"""Voice-control broker for a surgical AR scene.

Two voice front ends over one function surface: a keyword grammar and an
LLM intent router seeded with a patient-specific context prompt. Scene
mutations go through a validating dispatcher; a service API and replay
harness wrap the whole thing for operation and testing.
"""

__version__ = "0.1.0"
