"""Ambient services: configuration, logging, parallel dispatch, random streams."""
