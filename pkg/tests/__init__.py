"""
Test suite for hoidiff.

Covers:
- HOI image algebra and validation
- Forward processes, schedules and diagnostics
- The denoiser, its gradients and checkpoints
- Training, inference and metrics
- Artifact builders and the CLI
"""
