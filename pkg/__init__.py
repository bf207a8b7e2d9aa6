"""
桌面规模的统一表格识别工具：视觉码本、自监督预训练、结构/单元格框/内容统一建模与评测
"""

__version__ = '0.1.0'
