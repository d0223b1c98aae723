"""
Command-line front end for lqgraph.
"""
