"""
epinet - Duración de epidemias SIR supercríticas en grafos del modelo de configuración

Los módulos son planos y se importan entre sí por nombre; `python -m epinet`
agrega este directorio a sys.path antes de delegar en cli.main().
"""

__version__ = "1.0.0"
