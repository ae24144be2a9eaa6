#!/usr/bin/env python3
from setuptools import setup

setup(packages=[
    'rokhlindim',
    'rokhlindim.actions',
    'rokhlindim.cstar',
    'rokhlindim.scenario',
    'rokhlindim.utils',
])
