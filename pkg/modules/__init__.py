"""
Pseudogroup Fixed Point Toolkit
Germs, reduced words, recursive domains and perturbations of two-generator pseudogroups
"""

__version__ = "1.0.0"
__author__ = "Pseudogroup Dynamics"
