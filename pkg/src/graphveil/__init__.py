"""Anonymization of DAG-structured computations."""
