"""
Unit tests for risk assessment workflow.
"""

