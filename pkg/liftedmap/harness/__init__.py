"""Experiment harness: synthetic instances, runs, benches and trace comparison"""
