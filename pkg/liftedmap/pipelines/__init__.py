"""Application MRFs: stereo matching and cooperative segmentation"""
