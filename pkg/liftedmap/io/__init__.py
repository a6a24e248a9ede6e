"""Image and partition file formats"""
