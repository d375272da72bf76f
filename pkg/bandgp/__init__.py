"""Sparse variational Gaussian process regression with banded B-spline inducing features."""

__author__ = "Shawn Deng"
__email__ = "shawndeng1109@qq.com"
