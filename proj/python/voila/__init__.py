"""Streaming voice-language engine.

One Engine handle covers the whole system: synthetic corpus generation,
the streaming RVQ audio codec, speaker embeddings, ASR/TTS/chat inference
and full-duplex dialogue sessions, plus checkpoint save/load.
"""

from ._voila import Engine, read_wav, write_wav

__all__ = ["Engine", "read_wav", "write_wav"]
