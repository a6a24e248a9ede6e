"""Pairwise MRFs, partitions, reduced models and color passing"""
