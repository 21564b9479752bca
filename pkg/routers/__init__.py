# Routers package 